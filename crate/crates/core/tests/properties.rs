//! Property tests over the data layer: formula round-trips, split
//! partitioning, interpolation convexity, and compression inverses.

use proptest::prelude::*;
use tabflow_core::compress::{compress, decompress};
use tabflow_core::fixtures::retail_like;
use tabflow_core::formula::{parse_formula, FormulaExpr};
use tabflow_core::relspec::validate_spec;
use tabflow_core::schema::ColumnSchema;
use tabflow_core::serialize::serialize_columns;
use tabflow_core::smote::{smote_generate_traced, SmoteConfig};
use tabflow_core::split::split_train_test;
use tabflow_core::table::{Cell, CellValue, Table};

fn arbitrary_expr() -> impl Strategy<Value = FormulaExpr> {
    let leaf = prop_oneof![
        prop::sample::select(vec!["a", "b", "net total", "discount_rate", "x1"])
            .prop_map(|name| FormulaExpr::Col(name.to_string())),
        (0u32..1000, 0u32..100).prop_map(|(int, frac)| {
            FormulaExpr::Lit(int as f64 + frac as f64 / 100.0)
        }),
    ];
    leaf.prop_recursive(4, 64, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| FormulaExpr::Add(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| FormulaExpr::Sub(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| FormulaExpr::Mul(Box::new(a), Box::new(b))),
            (inner.clone(), inner.clone())
                .prop_map(|(a, b)| FormulaExpr::Div(Box::new(a), Box::new(b))),
            inner.prop_map(|a| FormulaExpr::Neg(Box::new(a))),
        ]
    })
}

proptest! {
    #[test]
    fn formula_pretty_print_reparses_to_the_same_ast(expr in arbitrary_expr()) {
        let printed = expr.to_string();
        let reparsed = parse_formula(&printed).expect("canonical form parses");
        prop_assert_eq!(expr, reparsed);
    }

    #[test]
    fn serialized_columns_round_trip(name in "[a-z][a-z0-9_ ]{0,12}[a-z0-9]", desc in "[ -~]{0,30}") {
        // names without the separator token round-trip exactly
        prop_assume!(!name.contains(" : "));
        let schema = vec![ColumnSchema::categorical(&name, &desc)];
        let serialized = serialize_columns(&schema);
        let (parsed_name, parsed_desc) = serialized[0].parse();
        prop_assert_eq!(parsed_name, name.as_str());
        prop_assert_eq!(parsed_desc, desc.as_str());
    }

    #[test]
    fn split_is_a_partition(n in 2usize..200, fraction in 0.05f64..0.95, seed in any::<u64>()) {
        let schema = vec![ColumnSchema::numeric("i", "")];
        let mut builder = Table::builder(schema).unwrap();
        for i in 0..n {
            builder.push_row(&[CellValue::Number(i as f64)]).unwrap();
        }
        let table = builder.finish();
        let (train, test) = split_train_test(&table, fraction, seed).unwrap();
        prop_assert_eq!(train.n_rows() + test.n_rows(), n);
        prop_assert_eq!(test.n_rows(), (fraction * n as f64).round() as usize);
        let mut seen: Vec<f64> = train.numeric_column(0).unwrap();
        seen.extend(test.numeric_column(0).unwrap());
        seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected: Vec<f64> = (0..n).map(|i| i as f64).collect();
        prop_assert_eq!(seen, expected);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn compression_round_trips_on_consistent_tables(rows in 20usize..120, seed in 0u64..500) {
        let (table, spec) = retail_like(rows, seed);
        // strict validation accepts the fixture ...
        let report = validate_spec(&spec, &table, 1e-9, 0.0).unwrap();
        prop_assert!(report.all_pass());
        // ... therefore compression must invert exactly
        let (compressed, ctx) = compress(&table, &spec).unwrap();
        let restored = decompress(&compressed, &ctx).unwrap();
        prop_assert_eq!(restored.n_rows(), table.n_rows());
        for row in 0..table.n_rows() {
            for col in 0..table.n_columns() {
                match (restored.cell(row, col), table.cell(row, col)) {
                    (Cell::Number(a), Cell::Number(b)) => {
                        // derived cells may differ by rounding precision only
                        prop_assert!((a - b).abs() <= 1e-9, "row {} col {}: {} vs {}", row, col, a, b);
                    }
                    (a, b) => prop_assert_eq!(
                        restored.category_str(a).map(str::to_string),
                        table.category_str(b).map(str::to_string)
                    ),
                }
                if let (Cell::Timestamp(a), Cell::Timestamp(b)) =
                    (restored.cell(row, col), table.cell(row, col))
                {
                    prop_assert_eq!(a, b);
                }
            }
        }
    }

    #[test]
    fn smote_outputs_are_convex_combinations(seed in 0u64..200) {
        let (table, _) = retail_like(40, seed);
        let cfg = SmoteConfig { k_neighbors: 3, n_samples: 30, seed };
        let (synth, traces) = smote_generate_traced(&table, &cfg).unwrap();
        for (row, trace) in traces.iter().enumerate() {
            for col in 0..table.n_columns() {
                match (synth.cell(row, col), table.cell(trace.seed_row, col), table.cell(trace.neighbor_row, col)) {
                    (Cell::Number(g), Cell::Number(a), Cell::Number(b)) => {
                        prop_assert!(g >= a.min(b) - 1e-12 && g <= a.max(b) + 1e-12);
                    }
                    (Cell::Category(_), Cell::Category(_), Cell::Category(_)) => {
                        let got = synth.category_str(synth.cell(row, col)).unwrap();
                        let from_seed = table.category_str(table.cell(trace.seed_row, col)).unwrap();
                        let from_neighbor =
                            table.category_str(table.cell(trace.neighbor_row, col)).unwrap();
                        prop_assert!(got == from_seed || got == from_neighbor);
                    }
                    (Cell::Timestamp(g), Cell::Timestamp(a), Cell::Timestamp(b)) => {
                        prop_assert!(g >= a.min(b) && g <= a.max(b));
                    }
                    _ => prop_assert!(false, "unexpected cell kinds"),
                }
            }
        }
    }
}
