//! Interpolation baseline: new rows as convex combinations of a seed row and
//! one of its k nearest neighbors. Distance is standardized L2 on numerics
//! (datetimes as seconds) plus 0/1 Hamming on categoricals, one unit of
//! weight per column.

use crate::error::{CoreError, Result};
use crate::rng::seeded;
use crate::schema::ColumnKind;
use crate::table::{Cell, CellValue, Table};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SmoteConfig {
    pub k_neighbors: usize,
    pub n_samples: usize,
    pub seed: u64,
}

impl SmoteConfig {
    pub fn new(n_samples: usize, seed: u64) -> Self {
        SmoteConfig {
            k_neighbors: 5,
            n_samples,
            seed,
        }
    }
}

/// Provenance of one generated row, used by the convexity checks.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SmoteTrace {
    pub seed_row: usize,
    pub neighbor_row: usize,
    pub lambda: f64,
}

struct DistanceModel {
    /// 1/std per column (0 weight slot for categoricals).
    inv_std: Vec<f64>,
}

impl DistanceModel {
    fn fit(table: &Table) -> Result<Self> {
        let mut inv_std = vec![0.0; table.n_columns()];
        for (idx, col) in table.schema().iter().enumerate() {
            if matches!(col.kind, ColumnKind::Numeric | ColumnKind::Datetime) {
                let values = table.numeric_column(idx)?;
                let n = values.len() as f64;
                let mean = values.iter().sum::<f64>() / n;
                let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                inv_std[idx] = 1.0 / var.sqrt().max(1e-8);
            }
        }
        Ok(DistanceModel { inv_std })
    }

    fn squared_distance(&self, table: &Table, a: usize, b: usize) -> f64 {
        let mut total = 0.0;
        for col in 0..table.n_columns() {
            match (table.cell(a, col), table.cell(b, col)) {
                (Cell::Number(x), Cell::Number(y)) => {
                    let d = (x - y) * self.inv_std[col];
                    total += d * d;
                }
                (Cell::Timestamp(x), Cell::Timestamp(y)) => {
                    let d = (x - y) as f64 * self.inv_std[col];
                    total += d * d;
                }
                (Cell::Category(x), Cell::Category(y)) => {
                    if x != y {
                        total += 1.0;
                    }
                }
                _ => total += 1.0,
            }
        }
        total
    }
}

fn k_nearest(
    table: &Table,
    model: &DistanceModel,
    row: usize,
    k: usize,
) -> Vec<usize> {
    let mut candidates: Vec<(f64, usize)> = (0..table.n_rows())
        .filter(|&other| other != row)
        .map(|other| (model.squared_distance(table, row, other), other))
        .collect();
    candidates.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite").then(a.1.cmp(&b.1)));
    candidates.truncate(k);
    candidates.into_iter().map(|(_, idx)| idx).collect()
}

/// Convex blend of two rows: numerics interpolate by `lambda`, categoricals
/// take the seed's value below 0.5 and the neighbor's at or above.
pub(crate) fn blend_rows<'a>(
    table: &'a Table,
    seed_row: usize,
    neighbor_row: usize,
    lambda: f64,
) -> Vec<CellValue<'a>> {
    (0..table.n_columns())
        .map(|col| match (table.cell(seed_row, col), table.cell(neighbor_row, col)) {
            (Cell::Number(a), Cell::Number(b)) => CellValue::Number(a + lambda * (b - a)),
            (Cell::Timestamp(a), Cell::Timestamp(b)) => {
                CellValue::Timestamp(a + ((lambda * (b - a) as f64).round() as i64))
            }
            (Cell::Category(a), Cell::Category(b)) => {
                let id = if lambda < 0.5 { a } else { b };
                CellValue::Category(table.token(id))
            }
            _ => CellValue::Missing,
        })
        .collect()
}

/// Generates `cfg.n_samples` rows; deterministic per seed.
pub fn smote_generate(real: &Table, cfg: &SmoteConfig) -> Result<Table> {
    Ok(smote_generate_traced(real, cfg)?.0)
}

/// As [`smote_generate`], also returning per-row provenance.
pub fn smote_generate_traced(real: &Table, cfg: &SmoteConfig) -> Result<(Table, Vec<SmoteTrace>)> {
    if cfg.k_neighbors < 1 || cfg.k_neighbors >= real.n_rows() {
        return Err(CoreError::InvalidArgument(format!(
            "k_neighbors = {} must be in [1, n_rows); n_rows = {}",
            cfg.k_neighbors,
            real.n_rows()
        )));
    }
    let all: Vec<usize> = (0..real.n_columns()).collect();
    if let Some((row, column)) = real.has_missing_in(&all) {
        return Err(CoreError::MissingCell { row, column });
    }

    let model = DistanceModel::fit(real)?;
    let mut neighbor_cache: HashMap<usize, Vec<usize>> = HashMap::new();
    let mut rng = seeded(cfg.seed);
    let mut builder = Table::builder(real.schema().to_vec())?;
    let mut traces = Vec::with_capacity(cfg.n_samples);

    for _ in 0..cfg.n_samples {
        let seed_row = rng.random_range(0..real.n_rows());
        let neighbors = neighbor_cache
            .entry(seed_row)
            .or_insert_with(|| k_nearest(real, &model, seed_row, cfg.k_neighbors));
        let neighbor_row = neighbors[rng.random_range(0..neighbors.len())];
        let lambda: f64 = rng.random();
        let cells = blend_rows(real, seed_row, neighbor_row, lambda);
        builder.push_row(&cells)?;
        traces.push(SmoteTrace {
            seed_row,
            neighbor_row,
            lambda,
        });
    }
    Ok((builder.finish(), traces))
}
