//! Deterministic synthetic datasets for tests, demos, and calibration:
//! a retail-shaped table exercising every relationship kind, and Gaussian
//! mixture samplers for the statistical checks.
//!
//! Money-like values sit on a dyadic lattice (quarters, integer quantities,
//! rates in {0, 0.25, 0.5}) so derived columns are exact in binary and
//! round-trips can be compared bit for bit.

use crate::formula::parse_formula;
use crate::relspec::{DerivedColumn, HierarchyGroup, MathGroup, RelationshipSpec, TemporalChain};
use crate::rng::{seeded, standard_normal};
use crate::schema::{ColumnRole, ColumnSchema};
use crate::table::{CellValue, Table};
use ndarray::Array2;
use rand::Rng;

const DAY: i64 = 86_400;
/// 2020-01-01T00:00:00Z
const EPOCH_2020: i64 = 1_577_836_800;

struct GeoPool {
    cities: Vec<&'static str>,
    // ancestor tuple per city index
    tuples: Vec<Vec<&'static str>>,
}

fn order_geo() -> GeoPool {
    let cities = vec![
        "Jakarta", "Surabaya", "Lyon", "Paris", "Osaka", "Tokyo", "Lima", "Cusco", "Lagos",
        "Abuja", "Sydney", "Perth",
    ];
    let tuples = vec![
        vec!["Jakarta Raya", "Indonesia", "Southeast Asia", "Pacific Asia"],
        vec!["East Java", "Indonesia", "Southeast Asia", "Pacific Asia"],
        vec!["Auvergne-Rhone-Alpes", "France", "Western Europe", "Europe"],
        vec!["Ile-de-France", "France", "Western Europe", "Europe"],
        vec!["Kansai", "Japan", "Eastern Asia", "Pacific Asia"],
        vec!["Kanto", "Japan", "Eastern Asia", "Pacific Asia"],
        vec!["Lima Province", "Peru", "South America", "LATAM"],
        vec!["Cusco Region", "Peru", "South America", "LATAM"],
        vec!["Lagos State", "Nigeria", "West Africa", "Africa"],
        vec!["FCT", "Nigeria", "West Africa", "Africa"],
        vec!["New South Wales", "Australia", "Oceania", "Pacific Asia"],
        vec!["Western Australia", "Australia", "Oceania", "Pacific Asia"],
    ];
    GeoPool { cities, tuples }
}

fn customer_geo() -> GeoPool {
    let cities = vec![
        "Caguas", "San Juan", "Chicago", "Aurora", "Toledo", "Madrid", "Leeds", "York",
    ];
    let tuples = vec![
        vec!["PR", "Puerto Rico"],
        vec!["PR", "Puerto Rico"],
        vec!["IL", "United States"],
        vec!["IL", "United States"],
        vec!["Castilla-La Mancha", "Spain"],
        vec!["Comunidad de Madrid", "Spain"],
        vec!["West Yorkshire", "United Kingdom"],
        vec!["North Yorkshire", "United Kingdom"],
    ];
    GeoPool { cities, tuples }
}

fn product_pool() -> GeoPool {
    let names = vec![
        "Field & Stream Sportsman 16 Gun Fire Safe",
        "Perfect Fitness Perfect Rip Deck",
        "Diamondback Women's Serene Classic Comfort Bi",
        "Nike Men's Free 5.0+ Running Shoe",
        "Nike Men's Dri-FIT Victory Golf Polo",
        "O'Brien Men's Neoprene Life Vest",
        "Pelican Sunstream 100 Kayak",
        "Under Armour Girls' Toddler Spine Surge Runni",
        "adidas Youth Germany Black/Red Away Match Soc",
        "insta-bed Neverflat Air Mattress",
    ];
    // category id, category name, department id, department name,
    // product card id, product category id
    let tuples = vec![
        vec!["17", "Cleats", "4", "Apparel", "191", "17"],
        vec!["73", "Sporting Goods", "2", "Fitness", "1360", "73"],
        vec!["43", "Camping & Hiking", "3", "Outdoors", "957", "43"],
        vec!["24", "Men's Footwear", "5", "Footwear", "403", "24"],
        vec!["29", "Men's Apparel", "4", "Apparel", "627", "29"],
        vec!["18", "Water Sports", "6", "Outdoors", "249", "18"],
        vec!["18", "Water Sports", "6", "Outdoors", "273", "18"],
        vec!["12", "Kids' Golf Clubs", "7", "Fan Shop", "136", "12"],
        vec!["35", "Soccer", "4", "Apparel", "771", "35"],
        vec!["45", "Bedding", "3", "Outdoors", "1014", "45"],
    ];
    GeoPool {
        cities: names,
        tuples,
    }
}

/// Schema of the retail-shaped fixture (28 columns, every Table-3-style
/// relationship kind represented).
pub fn retail_like_schema() -> Vec<ColumnSchema> {
    let mut schema = vec![
        ColumnSchema::categorical("order city", "city where the order was placed"),
        ColumnSchema::categorical("order state", "state of the order city"),
        ColumnSchema::categorical("order country", "country of the order city"),
        ColumnSchema::categorical("order region", "region of the order country"),
        ColumnSchema::categorical("order market", "market of the order region"),
        ColumnSchema::categorical("customer city", "city of the customer"),
        ColumnSchema::categorical("customer state", "state of the customer city"),
        ColumnSchema::categorical("customer country", "country of the customer city"),
        ColumnSchema::categorical("product name", "name of the purchased product"),
        ColumnSchema::categorical("category id", "identifier of the product category"),
        ColumnSchema::categorical("category name", "name of the product category"),
        ColumnSchema::categorical("department id", "identifier of the department"),
        ColumnSchema::categorical("department name", "name of the department"),
        ColumnSchema::categorical("product card id", "identifier of the product card"),
        ColumnSchema::categorical("product category id", "category id on the product card"),
        ColumnSchema::categorical("shipping mode", "shipping mode of the order"),
        ColumnSchema::categorical("order status", "status of the order"),
        ColumnSchema::numeric("quantity", "number of items ordered"),
        ColumnSchema::numeric("price", "unit price of the item"),
        ColumnSchema::numeric("discount rate", "discount rate applied to the order"),
        ColumnSchema::numeric("original price", "price times quantity before discount"),
        ColumnSchema::numeric("discount value", "discount amount in currency"),
        ColumnSchema::numeric("sales price", "amount charged after discount"),
        ColumnSchema::numeric("latitude", "latitude of the delivery location"),
        ColumnSchema::numeric("item profit ratio", "profit ratio of the item"),
        ColumnSchema::datetime("order date", "date the order was placed", "%Y-%m-%d"),
        ColumnSchema::datetime("delivery date", "date the order was delivered", "%Y-%m-%d"),
        ColumnSchema::categorical("late delivery", "whether delivery took over four days")
            .with_role(ColumnRole::Target),
    ];
    // display precision as a loader would infer it
    for col in schema.iter_mut() {
        match col.name.as_str() {
            "quantity" => col.decimal_places = Some(0),
            "price" | "original price" | "discount value" | "sales price" | "discount rate" => {
                col.decimal_places = Some(4)
            }
            "latitude" | "item profit ratio" => col.decimal_places = Some(4),
            _ => {}
        }
    }
    schema
}

/// The Table-3-shaped relationship spec for [`retail_like`].
pub fn retail_like_spec() -> RelationshipSpec {
    RelationshipSpec {
        hierarchies: vec![
            HierarchyGroup {
                granular: "order city".into(),
                ancestors: vec![
                    "order state".into(),
                    "order country".into(),
                    "order region".into(),
                    "order market".into(),
                ],
            },
            HierarchyGroup {
                granular: "customer city".into(),
                ancestors: vec!["customer state".into(), "customer country".into()],
            },
            HierarchyGroup {
                granular: "product name".into(),
                ancestors: vec![
                    "category id".into(),
                    "category name".into(),
                    "department id".into(),
                    "department name".into(),
                    "product card id".into(),
                    "product category id".into(),
                ],
            },
        ],
        math_groups: vec![MathGroup {
            independents: vec![
                "quantity".into(),
                "price".into(),
                "discount rate".into(),
                "original price".into(),
            ],
            derived: vec![
                DerivedColumn {
                    column: "discount value".into(),
                    formula: parse_formula("`original price` * `discount rate`").unwrap(),
                },
                DerivedColumn {
                    column: "sales price".into(),
                    formula: parse_formula("`original price` * (1 - `discount rate`)").unwrap(),
                },
            ],
        }],
        temporal_chains: vec![TemporalChain {
            columns: vec!["order date".into(), "delivery date".into()],
        }],
    }
}

/// Deterministic retail-shaped table satisfying every relationship in
/// [`retail_like_spec`] exactly.
pub fn retail_like(n_rows: usize, seed: u64) -> (Table, RelationshipSpec) {
    let schema = retail_like_schema();
    let orders = order_geo();
    let customers = customer_geo();
    let products = product_pool();
    let shipping = ["Standard Class", "First Class", "Second Class", "Same Day"];
    let statuses = ["COMPLETE", "PENDING", "CLOSED"];

    let mut rng = seeded(seed);
    let mut builder = Table::builder(schema).unwrap();
    for _ in 0..n_rows {
        let o = rng.random_range(0..orders.cities.len());
        let c = rng.random_range(0..customers.cities.len());
        let p = rng.random_range(0..products.cities.len());

        let quantity = rng.random_range(1..=8) as f64;
        // quarters keep every product of independents exact in binary
        let price = rng.random_range(4..=400) as f64 * 0.25;
        let discount_rate = [0.0, 0.25, 0.5][rng.random_range(0..3)];
        let original_price = quantity * price;
        let discount_value = original_price * discount_rate;
        let sales_price = original_price * (1.0 - discount_rate);

        let order_day = rng.random_range(0..180);
        let gap_days = rng.random_range(1..=9);
        let order_date = EPOCH_2020 + order_day * DAY;
        let delivery_date = order_date + gap_days * DAY;
        let late = if gap_days > 4 { "yes" } else { "no" };

        let latitude = ((rng.random::<f64>() * 100.0 - 40.0) * 1e4).round() / 1e4;
        let profit: f64 = standard_normal::<f64, _>(&mut rng) * 0.15 + 0.1;
        let profit = (profit * 1e4).round() / 1e4;

        let cells = vec![
            CellValue::Category(orders.cities[o]),
            CellValue::Category(orders.tuples[o][0]),
            CellValue::Category(orders.tuples[o][1]),
            CellValue::Category(orders.tuples[o][2]),
            CellValue::Category(orders.tuples[o][3]),
            CellValue::Category(customers.cities[c]),
            CellValue::Category(customers.tuples[c][0]),
            CellValue::Category(customers.tuples[c][1]),
            CellValue::Category(products.cities[p]),
            CellValue::Category(products.tuples[p][0]),
            CellValue::Category(products.tuples[p][1]),
            CellValue::Category(products.tuples[p][2]),
            CellValue::Category(products.tuples[p][3]),
            CellValue::Category(products.tuples[p][4]),
            CellValue::Category(products.tuples[p][5]),
            CellValue::Category(shipping[rng.random_range(0..shipping.len())]),
            CellValue::Category(statuses[rng.random_range(0..statuses.len())]),
            CellValue::Number(quantity),
            CellValue::Number(price),
            CellValue::Number(discount_rate),
            CellValue::Number(original_price),
            CellValue::Number(discount_value),
            CellValue::Number(sales_price),
            CellValue::Number(latitude),
            CellValue::Number(profit),
            CellValue::Timestamp(order_date),
            CellValue::Timestamp(delivery_date),
            CellValue::Category(late),
        ];
        builder.push_row(&cells).unwrap();
    }
    (builder.finish(), retail_like_spec())
}

/// Samples a diagonal Gaussian mixture as a dense matrix.
pub fn gaussian_mixture_matrix(
    n_rows: usize,
    centers: &[Vec<f64>],
    stds: &[f64],
    weights: &[f64],
    seed: u64,
) -> Array2<f64> {
    assert_eq!(centers.len(), weights.len());
    assert_eq!(centers.len(), stds.len());
    let d = centers[0].len();
    let mut rng = seeded(seed);
    let mut out = Array2::<f64>::zeros((n_rows, d));
    for mut row in out.rows_mut() {
        let mut pick: f64 = rng.random();
        let mut component = centers.len() - 1;
        for (k, &w) in weights.iter().enumerate() {
            pick -= w;
            if pick <= 0.0 {
                component = k;
                break;
            }
        }
        for j in 0..d {
            let noise: f64 = standard_normal(&mut rng);
            row[j] = centers[component][j] + stds[component] * noise;
        }
    }
    out
}

/// 4-D two-component mixture as a numeric table (for privacy calibration).
pub fn mixture_table_4d(n_rows: usize, seed: u64) -> Table {
    let centers = vec![vec![-2.0, -2.0, 1.0, 0.0], vec![2.0, 2.0, -1.0, 0.5]];
    let data = gaussian_mixture_matrix(n_rows, &centers, &[1.0, 0.7], &[0.5, 0.5], seed);
    let schema: Vec<ColumnSchema> = (0..4)
        .map(|j| ColumnSchema::numeric(&format!("f{j}"), ""))
        .collect();
    let mut builder = Table::builder(schema).unwrap();
    for row in data.rows() {
        let cells: Vec<CellValue> = row.iter().map(|&v| CellValue::Number(v)).collect();
        builder.push_row(&cells).unwrap();
    }
    builder.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::relspec::validate_spec;

    #[test]
    fn fixture_passes_strict_validation() {
        let (table, spec) = retail_like(500, 3);
        let report = validate_spec(&spec, &table, 1e-9, 0.0).unwrap();
        assert!(report.all_pass(), "{report:?}");
    }

    #[test]
    fn fixture_compresses_to_the_expected_schema() {
        let (table, spec) = retail_like(200, 1);
        assert_eq!(table.n_columns(), 28);
        let (compressed, _) = crate::compress::compress(&table, &spec).unwrap();
        // 28 - 12 ancestors - 2 derived - 1 chain column + 1 diff = 14
        assert_eq!(compressed.n_columns(), 14);
        assert!(compressed.column_index("dt__order date__2").is_ok());
    }

    #[test]
    fn mixture_matrix_respects_weights() {
        let data = gaussian_mixture_matrix(
            10_000,
            &[vec![-5.0], vec![5.0]],
            &[0.5, 0.5],
            &[0.3, 0.7],
            4,
        );
        let positive = data.iter().filter(|&&v| v > 0.0).count() as f64 / 10_000.0;
        assert!((positive - 0.7).abs() < 0.02, "weight estimate {positive}");
    }
}
