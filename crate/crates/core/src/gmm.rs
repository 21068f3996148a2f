//! Diagonal-covariance Gaussian mixtures fitted by expectation-maximization
//! with k-means++ initialization. Log-likelihood is tracked per iteration and
//! is nondecreasing up to floating-point noise.

use crate::error::{CoreError, Result};
use crate::rng::{seeded, SeededRng};
use crate::scalar::Scalar;
use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub const VARIANCE_FLOOR: f64 = 1e-6;
const MAX_ITERATIONS: usize = 200;
const TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct GmmModel<T: Scalar> {
    /// Component weights on the simplex.
    pub weights: Array1<T>,
    /// K x d component means.
    pub means: Array2<T>,
    /// K x d diagonal variances, floored at 1e-6.
    pub variances: Array2<T>,
    /// Mean log-likelihood after each EM iteration.
    pub log_likelihood_trace: Vec<f64>,
}

impl<T: Scalar> GmmModel<T> {
    pub fn n_components(&self) -> usize {
        self.means.nrows()
    }

    /// Log density of one row under the mixture.
    pub fn log_density(&self, row: &[T]) -> f64 {
        let k = self.n_components();
        let mut terms = Vec::with_capacity(k);
        for c in 0..k {
            let mut log_prob = self.weights[c].to_f64_lossy().max(1e-300).ln();
            for (j, &x) in row.iter().enumerate() {
                let mean = self.means[(c, j)].to_f64_lossy();
                let var = self.variances[(c, j)].to_f64_lossy();
                let diff = x.to_f64_lossy() - mean;
                log_prob +=
                    -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + diff * diff / var);
            }
            terms.push(log_prob);
        }
        log_sum_exp(&terms)
    }

    /// Mean per-row log-likelihood of a dataset under this model.
    pub fn mean_log_likelihood(&self, data: &Array2<T>) -> f64 {
        let mut total = 0.0;
        for row in data.rows() {
            total += self.log_density(row.as_slice().expect("standard layout"));
        }
        total / data.nrows() as f64
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Fits a K-component diagonal GMM. Deterministic per seed; stops when the
/// mean log-likelihood improves by less than 1e-6 or after 200 iterations.
/// Fully degenerate data (all rows identical) falls back to one component.
pub fn fit_gmm<T: Scalar>(data: &Array2<T>, k: usize, seed: u64) -> Result<GmmModel<T>> {
    if k < 1 {
        return Err(CoreError::InvalidArgument("need K >= 1 components".into()));
    }
    let n = data.nrows();
    if n < k {
        return Err(CoreError::InvalidArgument(format!(
            "need at least K = {k} rows, got {n}"
        )));
    }
    let d = data.ncols();

    let degenerate = data
        .rows()
        .into_iter()
        .all(|row| row.iter().zip(data.row(0).iter()).all(|(a, b)| a == b));
    if degenerate {
        log::warn!("all rows identical; fitting a single floored component");
        let mut variances = Array2::<T>::zeros((1, d));
        variances.fill(T::of(VARIANCE_FLOOR));
        let mut means = Array2::<T>::zeros((1, d));
        means.row_mut(0).assign(&data.row(0));
        let model = GmmModel {
            weights: Array1::ones(1),
            means,
            variances,
            log_likelihood_trace: Vec::new(),
        };
        return Ok(model);
    }

    let mut rng = seeded(seed);
    let centers = kmeans_plus_plus_centers(data, k, &mut rng);

    // hard-assign to the nearest center for initial moments
    let mut assignment = vec![0usize; n];
    for (i, row) in data.rows().into_iter().enumerate() {
        let mut best = 0usize;
        let mut best_dist = f64::INFINITY;
        for (c, center) in centers.rows().into_iter().enumerate() {
            let dist: f64 = row
                .iter()
                .zip(center.iter())
                .map(|(&a, &b)| (a.to_f64_lossy() - b.to_f64_lossy()).powi(2))
                .sum();
            if dist < best_dist {
                best_dist = dist;
                best = c;
            }
        }
        assignment[i] = best;
    }

    let mut weights = Array1::<T>::zeros(k);
    let mut means = Array2::<T>::zeros((k, d));
    let mut variances = Array2::<T>::zeros((k, d));
    {
        let mut counts = vec![0usize; k];
        for (i, &c) in assignment.iter().enumerate() {
            counts[c] += 1;
            for j in 0..d {
                means[(c, j)] += data[(i, j)];
            }
        }
        for c in 0..k {
            let count = counts[c].max(1);
            weights[c] = T::of(counts[c].max(1) as f64 / n as f64);
            for j in 0..d {
                means[(c, j)] = means[(c, j)] / T::of(count as f64);
            }
        }
        for (i, &c) in assignment.iter().enumerate() {
            for j in 0..d {
                let diff = data[(i, j)] - means[(c, j)];
                variances[(c, j)] += diff * diff;
            }
        }
        for c in 0..k {
            let count = counts[c].max(1);
            for j in 0..d {
                variances[(c, j)] = (variances[(c, j)] / T::of(count as f64))
                    .max(T::of(VARIANCE_FLOOR));
            }
        }
        // renormalize in case of empty clusters
        let total: T = weights.iter().cloned().sum();
        weights.mapv_inplace(|w| w / total);
    }

    let mut model = GmmModel {
        weights,
        means,
        variances,
        log_likelihood_trace: Vec::new(),
    };

    let mut responsibilities = Array2::<f64>::zeros((n, k));
    let mut previous_ll = f64::NEG_INFINITY;
    for _iteration in 0..MAX_ITERATIONS {
        // E-step
        let mut total_ll = 0.0;
        for (i, row) in data.rows().into_iter().enumerate() {
            let row = row.as_slice().expect("standard layout");
            let mut log_terms = Vec::with_capacity(k);
            for c in 0..k {
                let mut lp = model.weights[c].to_f64_lossy().max(1e-300).ln();
                for (j, &x) in row.iter().enumerate() {
                    let mean = model.means[(c, j)].to_f64_lossy();
                    let var = model.variances[(c, j)].to_f64_lossy();
                    let diff = x.to_f64_lossy() - mean;
                    lp += -0.5 * ((2.0 * std::f64::consts::PI * var).ln() + diff * diff / var);
                }
                log_terms.push(lp);
            }
            let norm = log_sum_exp(&log_terms);
            total_ll += norm;
            for c in 0..k {
                responsibilities[(i, c)] = (log_terms[c] - norm).exp();
            }
        }
        let mean_ll = total_ll / n as f64;
        model.log_likelihood_trace.push(mean_ll);
        if mean_ll - previous_ll < TOLERANCE && previous_ll.is_finite() {
            break;
        }
        previous_ll = mean_ll;

        // M-step
        for c in 0..k {
            let resp_sum: f64 = (0..n).map(|i| responsibilities[(i, c)]).sum();
            let resp_sum = resp_sum.max(1e-12);
            model.weights[c] = T::of(resp_sum / n as f64);
            for j in 0..d {
                let mut mean = 0.0;
                for i in 0..n {
                    mean += responsibilities[(i, c)] * data[(i, j)].to_f64_lossy();
                }
                mean /= resp_sum;
                model.means[(c, j)] = T::of(mean);
                let mut var = 0.0;
                for i in 0..n {
                    let diff = data[(i, j)].to_f64_lossy() - mean;
                    var += responsibilities[(i, c)] * diff * diff;
                }
                var /= resp_sum;
                model.variances[(c, j)] = T::of(var.max(VARIANCE_FLOOR));
            }
        }
    }
    Ok(model)
}

/// k-means++ center selection: first uniform, then proportional to squared
/// distance from the nearest chosen center.
fn kmeans_plus_plus_centers<T: Scalar>(
    data: &Array2<T>,
    k: usize,
    rng: &mut SeededRng,
) -> Array2<T> {
    let n = data.nrows();
    let d = data.ncols();
    let mut centers = Array2::<T>::zeros((k, d));
    let first = rng.random_range(0..n);
    centers.row_mut(0).assign(&data.row(first));

    let mut nearest_sq = vec![0.0f64; n];
    for chosen in 1..k {
        for (i, row) in data.rows().into_iter().enumerate() {
            let mut best = f64::INFINITY;
            for c in 0..chosen {
                let dist: f64 = row
                    .iter()
                    .zip(centers.row(c).iter())
                    .map(|(&a, &b)| (a.to_f64_lossy() - b.to_f64_lossy()).powi(2))
                    .sum();
                best = best.min(dist);
            }
            nearest_sq[i] = best;
        }
        let total: f64 = nearest_sq.iter().sum();
        let index = if total <= 0.0 {
            rng.random_range(0..n)
        } else {
            let mut target = rng.random::<f64>() * total;
            let mut picked = n - 1;
            for (i, &w) in nearest_sq.iter().enumerate() {
                target -= w;
                if target <= 0.0 {
                    picked = i;
                    break;
                }
            }
            picked
        };
        centers.row_mut(chosen).assign(&data.row(index));
    }
    centers
}
