//! Gradient-boosted decision trees over dense features: exact greedy splits,
//! depth-limited regression trees, logistic loss for binary classification,
//! squared loss for regression, shrinkage, and patience-based early stopping
//! on a holdout. Training is deterministic (no subsampling).

use crate::error::{CoreError, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

const LAMBDA: f64 = 1e-6;
const PATIENCE: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Classification,
    Regression,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut index = 0usize;
        loop {
            match &self.nodes[index] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    index = if row[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }
}

struct TreeBuilder<'a> {
    x: &'a Array2<f64>,
    gradients: &'a [f64],
    hessians: &'a [f64],
    max_depth: usize,
    nodes: Vec<Node>,
}

impl<'a> TreeBuilder<'a> {
    fn build(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let g_sum: f64 = rows.iter().map(|&i| self.gradients[i]).sum();
        let h_sum: f64 = rows.iter().map(|&i| self.hessians[i]).sum();

        let make_leaf = |nodes: &mut Vec<Node>| {
            nodes.push(Node::Leaf {
                value: g_sum / (h_sum + LAMBDA),
            });
            nodes.len() - 1
        };

        if depth >= self.max_depth || rows.len() < 2 {
            return make_leaf(&mut self.nodes);
        }

        let parent_score = g_sum * g_sum / (h_sum + LAMBDA);
        let mut best: Option<(f64, usize, f64)> = None; // (gain, feature, threshold)
        let mut sortable: Vec<(f64, f64, f64)> = Vec::with_capacity(rows.len());
        for feature in 0..self.x.ncols() {
            sortable.clear();
            for &i in &rows {
                sortable.push((self.x[(i, feature)], self.gradients[i], self.hessians[i]));
            }
            sortable.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite features"));
            let mut gl = 0.0;
            let mut hl = 0.0;
            for idx in 0..sortable.len() - 1 {
                gl += sortable[idx].1;
                hl += sortable[idx].2;
                if sortable[idx].0 == sortable[idx + 1].0 {
                    continue; // can't split between equal values
                }
                let gr = g_sum - gl;
                let hr = h_sum - hl;
                let gain =
                    gl * gl / (hl + LAMBDA) + gr * gr / (hr + LAMBDA) - parent_score;
                if gain > best.map_or(1e-12, |b| b.0) {
                    let threshold = 0.5 * (sortable[idx].0 + sortable[idx + 1].0);
                    best = Some((gain, feature, threshold));
                }
            }
        }

        let Some((_, feature, threshold)) = best else {
            return make_leaf(&mut self.nodes);
        };
        let (left_rows, right_rows): (Vec<usize>, Vec<usize>) = rows
            .into_iter()
            .partition(|&i| self.x[(i, feature)] <= threshold);
        // placeholder, patched after children exist
        self.nodes.push(Node::Leaf { value: 0.0 });
        let this = self.nodes.len() - 1;
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[this] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        this
    }
}

fn fit_tree(
    x: &Array2<f64>,
    gradients: &[f64],
    hessians: &[f64],
    max_depth: usize,
) -> RegressionTree {
    let mut builder = TreeBuilder {
        x,
        gradients,
        hessians,
        max_depth,
        nodes: Vec::new(),
    };
    let rows: Vec<usize> = (0..x.nrows()).collect();
    let root = builder.build(rows, 0);
    debug_assert_eq!(root, 0);
    RegressionTree {
        nodes: builder.nodes,
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GbdtConfig {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            n_trees: 200,
            learning_rate: 0.1,
            max_depth: 3,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Gbdt {
    pub task: Task,
    base_score: f64,
    shrinkage: f64,
    trees: Vec<RegressionTree>,
    /// Holdout loss after each boosting round.
    pub validation_trace: Vec<f64>,
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl Gbdt {
    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    /// Raw margin (classification) or prediction (regression).
    pub fn predict_raw(&self, row: &[f64]) -> f64 {
        let mut score = self.base_score;
        for tree in &self.trees {
            score += self.shrinkage * tree.predict_row(row);
        }
        score
    }

    /// Probability of the positive class.
    pub fn predict_proba(&self, row: &[f64]) -> f64 {
        match self.task {
            Task::Classification => sigmoid(self.predict_raw(row)),
            Task::Regression => self.predict_raw(row),
        }
    }
}

/// Trains with early stopping: stops after 20 rounds without holdout
/// improvement and truncates to the best round.
pub fn train_gbdt(
    x_train: &Array2<f64>,
    y_train: &[f64],
    x_val: &Array2<f64>,
    y_val: &[f64],
    task: Task,
    config: &GbdtConfig,
) -> Result<Gbdt> {
    if x_train.nrows() == 0 || x_train.nrows() != y_train.len() {
        return Err(CoreError::InvalidArgument(
            "training features and labels must be nonempty and aligned".into(),
        ));
    }
    if task == Task::Classification {
        let has_pos = y_train.iter().any(|&y| y > 0.5);
        let has_neg = y_train.iter().any(|&y| y <= 0.5);
        if !has_pos || !has_neg {
            return Err(CoreError::InvalidArgument(
                "classification training data has a single class".into(),
            ));
        }
    }

    let n = x_train.nrows();
    let base_score = match task {
        Task::Regression => y_train.iter().sum::<f64>() / n as f64,
        Task::Classification => {
            let p = (y_train.iter().sum::<f64>() / n as f64).clamp(1e-6, 1.0 - 1e-6);
            (p / (1.0 - p)).ln()
        }
    };

    let mut model = Gbdt {
        task,
        base_score,
        shrinkage: config.learning_rate,
        trees: Vec::new(),
        validation_trace: Vec::new(),
    };

    let mut train_scores = vec![base_score; n];
    let mut val_scores = vec![base_score; x_val.nrows()];
    let mut best_loss = f64::INFINITY;
    let mut best_round = 0usize;

    let mut gradients = vec![0.0; n];
    let mut hessians = vec![1.0; n];

    for round in 0..config.n_trees {
        match task {
            Task::Regression => {
                for i in 0..n {
                    gradients[i] = y_train[i] - train_scores[i];
                }
            }
            Task::Classification => {
                for i in 0..n {
                    let p = sigmoid(train_scores[i]);
                    gradients[i] = y_train[i] - p;
                    hessians[i] = (p * (1.0 - p)).max(1e-12);
                }
            }
        }
        let tree = fit_tree(x_train, &gradients, &hessians, config.max_depth);
        for (i, row) in x_train.rows().into_iter().enumerate() {
            let slice = row.as_slice().expect("standard layout");
            train_scores[i] += config.learning_rate * tree.predict_row(slice);
        }
        for (i, row) in x_val.rows().into_iter().enumerate() {
            let slice = row.as_slice().expect("standard layout");
            val_scores[i] += config.learning_rate * tree.predict_row(slice);
        }
        model.trees.push(tree);

        let val_loss = match task {
            Task::Regression => {
                val_scores
                    .iter()
                    .zip(y_val)
                    .map(|(s, y)| (s - y) * (s - y))
                    .sum::<f64>()
                    / val_scores.len().max(1) as f64
            }
            Task::Classification => {
                val_scores
                    .iter()
                    .zip(y_val)
                    .map(|(s, y)| {
                        let p = sigmoid(*s).clamp(1e-12, 1.0 - 1e-12);
                        -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
                    })
                    .sum::<f64>()
                    / val_scores.len().max(1) as f64
            }
        };
        model.validation_trace.push(val_loss);
        if val_loss < best_loss - 1e-12 {
            best_loss = val_loss;
            best_round = round + 1;
        } else if round + 1 - best_round >= PATIENCE {
            break;
        }
    }
    if x_val.nrows() > 0 {
        model.trees.truncate(best_round.max(1));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal_matrix, seeded};
    use rand::Rng;

    fn separable(n: usize, seed: u64) -> (Array2<f64>, Vec<f64>) {
        let mut x = normal_matrix::<f64, _>(&mut seeded(seed), n, 2);
        let mut y = Vec::with_capacity(n);
        for (i, mut row) in x.rows_mut().into_iter().enumerate() {
            let label = i % 2;
            let shift = if label == 1 { 2.5 } else { -2.5 };
            row[0] += shift;
            y.push(label as f64);
        }
        (x, y)
    }

    #[test]
    fn classifies_a_separable_fixture() {
        let (x, y) = separable(400, 1);
        let (xv, yv) = separable(100, 2);
        let model = train_gbdt(&x, &y, &xv, &yv, Task::Classification, &GbdtConfig::default())
            .unwrap();
        let mut correct = 0;
        for (i, row) in xv.rows().into_iter().enumerate() {
            let p = model.predict_proba(row.as_slice().unwrap());
            if (p > 0.5) == (yv[i] > 0.5) {
                correct += 1;
            }
        }
        assert!(correct >= 95, "only {correct}/100 correct");
    }

    #[test]
    fn regression_fits_a_linear_target() {
        let x = normal_matrix::<f64, _>(&mut seeded(4), 500, 3);
        let y: Vec<f64> = x
            .rows()
            .into_iter()
            .map(|r| 2.0 * r[0] - 1.0 * r[1] + 0.5 * r[2])
            .collect();
        let xv = normal_matrix::<f64, _>(&mut seeded(5), 200, 3);
        let yv: Vec<f64> = xv
            .rows()
            .into_iter()
            .map(|r| 2.0 * r[0] - 1.0 * r[1] + 0.5 * r[2])
            .collect();
        let model =
            train_gbdt(&x, &y, &xv, &yv, Task::Regression, &GbdtConfig::default()).unwrap();
        let mse: f64 = xv
            .rows()
            .into_iter()
            .zip(&yv)
            .map(|(r, y)| (model.predict_raw(r.as_slice().unwrap()) - y).powi(2))
            .sum::<f64>()
            / 200.0;
        let var: f64 = yv.iter().map(|y| y * y).sum::<f64>() / 200.0;
        assert!(mse < 0.2 * var, "mse {mse} vs var {var}");
    }

    #[test]
    fn early_stopping_truncates_to_the_best_round() {
        // random labels: validation loss cannot keep improving for 200 rounds
        let x = normal_matrix::<f64, _>(&mut seeded(7), 200, 2);
        let mut rng = seeded(8);
        let y: Vec<f64> = (0..200).map(|_| f64::from(rng.random::<bool>())).collect();
        let xv = normal_matrix::<f64, _>(&mut seeded(9), 100, 2);
        let yv: Vec<f64> = (0..100).map(|_| f64::from(rng.random::<bool>())).collect();
        let model = train_gbdt(&x, &y, &xv, &yv, Task::Classification, &GbdtConfig::default())
            .unwrap();
        assert!(model.n_trees() < 200, "kept {} trees", model.n_trees());
    }

    #[test]
    fn single_class_training_is_rejected() {
        let x = normal_matrix::<f64, _>(&mut seeded(1), 10, 2);
        let y = vec![1.0; 10];
        let err = train_gbdt(&x, &y, &x, &y, Task::Classification, &GbdtConfig::default())
            .unwrap_err();
        assert!(matches!(err, CoreError::InvalidArgument(_)));
    }

    #[test]
    fn training_is_deterministic() {
        let (x, y) = separable(100, 3);
        let (xv, yv) = separable(50, 4);
        let cfg = GbdtConfig::default();
        let a = train_gbdt(&x, &y, &xv, &yv, Task::Classification, &cfg).unwrap();
        let b = train_gbdt(&x, &y, &xv, &yv, Task::Classification, &cfg).unwrap();
        assert_eq!(a.validation_trace, b.validation_trace);
        let row = [0.3, -0.7];
        assert_eq!(a.predict_raw(&row), b.predict_raw(&row));
    }
}
