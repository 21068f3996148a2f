//! Machine-learning efficiency: train the built-in gradient-boosted model on
//! synthetic data, evaluate on real held-out data.

use crate::embed::embed_lenient;
use crate::error::{CoreError, Result};
use crate::gbdt::{train_gbdt, Gbdt, GbdtConfig, Task};
use crate::rng::seeded;
use crate::schema::{ColumnKind, ColumnSchema};
use crate::table::Table;
use crate::vae::fit_codec;
use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtilityConfig {
    pub target: String,
    pub task: Task,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlEfficiency {
    pub task: Task,
    /// auc/f1 (classification) or r2/rmse/mae (regression); auc, f1 and r2
    /// are reported on the 0-100 scale, errors in native units.
    pub metrics: BTreeMap<String, f64>,
    pub chosen: GbdtConfig,
}

fn feature_schema(table: &Table, target: &str) -> Result<(Vec<usize>, Vec<ColumnSchema>)> {
    let target_idx = table.column_index(target)?;
    let indices: Vec<usize> = (0..table.n_columns()).filter(|&i| i != target_idx).collect();
    let schema = indices.iter().map(|&i| table.schema()[i].clone()).collect();
    Ok((indices, schema))
}

fn restrict(table: &Table, indices: &[usize], schema: Vec<ColumnSchema>) -> Result<Table> {
    let mut builder = Table::builder(schema)?;
    for row in 0..table.n_rows() {
        let cells: Vec<_> = indices.iter().map(|&i| table.cell_value(row, i)).collect();
        builder.push_row(&cells)?;
    }
    Ok(builder.finish())
}

/// Binary labels from the target column. Categorical targets map their
/// training vocabulary (exactly two classes) to 0/1; numeric targets must
/// already be 0/1-valued.
fn labels(
    table: &Table,
    target: &str,
    task: Task,
    class_map: Option<&BTreeMap<String, f64>>,
) -> Result<(Vec<f64>, Option<BTreeMap<String, f64>>)> {
    let idx = table.column_index(target)?;
    match (task, table.schema()[idx].kind) {
        (Task::Regression, ColumnKind::Numeric) => {
            Ok((table.numeric_column(idx)?, None))
        }
        (Task::Regression, kind) => Err(CoreError::KindMismatch {
            column: target.to_string(),
            expected: "numeric".into(),
            actual: kind.to_string(),
        }),
        (Task::Classification, ColumnKind::Categorical) => {
            let tokens = table.categorical_column(idx)?;
            let map = match class_map {
                Some(m) => m.clone(),
                None => {
                    let mut classes: Vec<&str> = Vec::new();
                    for t in &tokens {
                        if !classes.contains(t) {
                            classes.push(t);
                        }
                    }
                    if classes.len() != 2 {
                        return Err(CoreError::InvalidArgument(format!(
                            "classification target '{target}' has {} classes, need exactly 2",
                            classes.len()
                        )));
                    }
                    classes.sort();
                    classes
                        .iter()
                        .enumerate()
                        .map(|(i, c)| (c.to_string(), i as f64))
                        .collect()
                }
            };
            let values = tokens
                .iter()
                .map(|t| {
                    map.get(*t).copied().ok_or_else(|| CoreError::OutOfVocabulary {
                        column: target.to_string(),
                        token: t.to_string(),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            Ok((values, Some(map)))
        }
        (Task::Classification, ColumnKind::Numeric) => {
            let values = table.numeric_column(idx)?;
            if values.iter().any(|v| *v != 0.0 && *v != 1.0) {
                return Err(CoreError::InvalidArgument(format!(
                    "numeric classification target '{target}' must be 0/1-valued"
                )));
            }
            Ok((values, None))
        }
        (Task::Classification, kind) => Err(CoreError::KindMismatch {
            column: target.to_string(),
            expected: "categorical or 0/1 numeric".into(),
            actual: kind.to_string(),
        }),
    }
}

/// Trains on `synth_train` (with a seeded 10% holdout and a small
/// hyperparameter sweep selected on that holdout) and scores on `real_test`.
pub fn ml_efficiency(
    synth_train: &Table,
    real_test: &Table,
    config: &UtilityConfig,
    seed: u64,
) -> Result<MlEfficiency> {
    if synth_train.n_rows() == 0 {
        return Err(CoreError::InvalidArgument("empty synthetic training set".into()));
    }
    let (indices, schema) = feature_schema(synth_train, &config.target)?;
    let synth_features = restrict(synth_train, &indices, schema.clone())?;
    let (test_indices, test_schema) = feature_schema(real_test, &config.target)?;
    let real_features = restrict(real_test, &test_indices, test_schema)?;

    let codec = fit_codec(&synth_features)?;
    let x_synth: Array2<f64> = embed_lenient::<f64>(&codec, &synth_features)?.data;
    let x_test: Array2<f64> = embed_lenient::<f64>(&codec, &real_features)?.data;

    let (y_synth, class_map) = labels(synth_train, &config.target, config.task, None)?;
    let (y_test, _) = labels(real_test, &config.target, config.task, class_map.as_ref())?;

    // seeded 10% synthetic holdout for early stopping and model selection
    let n = synth_train.n_rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seeded(seed));
    let n_holdout = (n / 10).max(1).min(n - 1);
    let (holdout_idx, train_idx) = order.split_at(n_holdout);

    let gather = |rows: &[usize]| -> (Array2<f64>, Vec<f64>) {
        let mut x = Array2::<f64>::zeros((rows.len(), x_synth.ncols()));
        let mut y = Vec::with_capacity(rows.len());
        for (i, &r) in rows.iter().enumerate() {
            x.row_mut(i).assign(&x_synth.row(r));
            y.push(y_synth[r]);
        }
        (x, y)
    };
    let (x_train, y_train) = gather(train_idx);
    let (x_holdout, y_holdout) = gather(holdout_idx);

    let mut best: Option<(f64, Gbdt, GbdtConfig)> = None;
    for n_trees in [100usize, 200] {
        for learning_rate in [0.1f64, 0.01] {
            let candidate_config = GbdtConfig {
                n_trees,
                learning_rate,
                max_depth: 3,
            };
            let model = train_gbdt(
                &x_train,
                &y_train,
                &x_holdout,
                &y_holdout,
                config.task,
                &candidate_config,
            )?;
            let holdout_loss = model
                .validation_trace
                .iter()
                .cloned()
                .fold(f64::INFINITY, f64::min);
            if best.as_ref().is_none_or(|(loss, _, _)| holdout_loss < *loss) {
                best = Some((holdout_loss, model, candidate_config));
            }
        }
    }
    let (_, model, chosen) = best.expect("sweep is nonempty");

    let predictions: Vec<f64> = x_test
        .rows()
        .into_iter()
        .map(|row| model.predict_proba(row.as_slice().expect("standard layout")))
        .collect();

    let mut metrics = BTreeMap::new();
    match config.task {
        Task::Classification => {
            metrics.insert(
                "auc".to_string(),
                100.0 * super::auc_from_scores(&y_test, &predictions),
            );
            metrics.insert(
                "f1".to_string(),
                100.0 * super::f1_binary(&y_test, &predictions),
            );
        }
        Task::Regression => {
            metrics.insert(
                "r2".to_string(),
                100.0 * super::r_squared(&y_test, &predictions).max(0.0),
            );
            metrics.insert("rmse".to_string(), super::rmse(&y_test, &predictions));
            metrics.insert("mae".to_string(), super::mae(&y_test, &predictions));
        }
    }
    Ok(MlEfficiency {
        task: config.task,
        metrics,
        chosen,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::standard_normal;
    use crate::table::CellValue;

    /// 2-D fixture with a wide margin between classes.
    fn separable_table(n: usize, seed: u64, shuffle_labels: bool) -> Table {
        let schema = vec![
            ColumnSchema::numeric("x", ""),
            ColumnSchema::numeric("y", ""),
            ColumnSchema::categorical("label", ""),
        ];
        let mut rng = seeded(seed);
        let mut b = Table::builder(schema).unwrap();
        for i in 0..n {
            let class = i % 2;
            let shift = if class == 1 { 3.0 } else { -3.0 };
            let x: f64 = standard_normal::<f64, _>(&mut rng) * 0.5 + shift;
            let y: f64 = standard_normal::<f64, _>(&mut rng) * 0.5;
            let label = if shuffle_labels {
                if rand::Rng::random::<bool>(&mut rng) {
                    "pos"
                } else {
                    "neg"
                }
            } else if class == 1 {
                "pos"
            } else {
                "neg"
            };
            b.push_row(&[
                CellValue::Number(x),
                CellValue::Number(y),
                CellValue::Category(label),
            ])
            .unwrap();
        }
        b.finish()
    }

    #[test]
    fn real_as_synth_on_separable_data_has_high_auc() {
        let train = separable_table(600, 1, false);
        let test = separable_table(300, 2, false);
        let config = UtilityConfig {
            target: "label".into(),
            task: Task::Classification,
        };
        let out = ml_efficiency(&train, &test, &config, 7).unwrap();
        assert!(out.metrics["auc"] >= 95.0, "auc {}", out.metrics["auc"]);
        assert!(out.metrics["f1"] >= 90.0, "f1 {}", out.metrics["f1"]);
    }

    #[test]
    fn shuffled_labels_sit_at_chance() {
        let train = separable_table(600, 3, true);
        let test = separable_table(300, 4, false);
        let config = UtilityConfig {
            target: "label".into(),
            task: Task::Classification,
        };
        let out = ml_efficiency(&train, &test, &config, 7).unwrap();
        let auc = out.metrics["auc"];
        assert!((auc - 50.0).abs() <= 5.0, "auc {auc}");
    }

    #[test]
    fn regression_on_linear_fixture() {
        let schema = vec![
            ColumnSchema::numeric("x", ""),
            ColumnSchema::numeric("target", ""),
        ];
        let make = |seed: u64| {
            let mut rng = seeded(seed);
            let mut b = Table::builder(schema.clone()).unwrap();
            for _ in 0..500 {
                let x: f64 = standard_normal(&mut rng);
                b.push_row(&[CellValue::Number(x), CellValue::Number(3.0 * x + 1.0)])
                    .unwrap();
            }
            b.finish()
        };
        let config = UtilityConfig {
            target: "target".into(),
            task: Task::Regression,
        };
        let out = ml_efficiency(&make(1), &make(2), &config, 3).unwrap();
        assert!(out.metrics["r2"] >= 90.0, "r2 {}", out.metrics["r2"]);
        assert!(out.metrics.contains_key("rmse"));
        assert!(out.metrics.contains_key("mae"));
    }

    #[test]
    fn single_class_target_is_rejected() {
        let schema = vec![
            ColumnSchema::numeric("x", ""),
            ColumnSchema::categorical("label", ""),
        ];
        let mut b = Table::builder(schema).unwrap();
        for i in 0..50 {
            b.push_row(&[CellValue::Number(i as f64), CellValue::Category("only")])
                .unwrap();
        }
        let t = b.finish();
        let config = UtilityConfig {
            target: "label".into(),
            task: Task::Classification,
        };
        assert!(ml_efficiency(&t, &t, &config, 0).is_err());
    }

    #[test]
    fn deterministic_under_fixed_seed() {
        let train = separable_table(200, 5, false);
        let test = separable_table(100, 6, false);
        let config = UtilityConfig {
            target: "label".into(),
            task: Task::Classification,
        };
        let a = ml_efficiency(&train, &test, &config, 11).unwrap();
        let b = ml_efficiency(&train, &test, &config, 11).unwrap();
        assert_eq!(a.metrics, b.metrics);
    }
}
