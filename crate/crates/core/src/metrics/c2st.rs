//! Classifier two-sample test: a logistic-regression discriminator between
//! real and synthetic rows, scored so that 100 means indistinguishable.

use crate::embed::EmbeddedMatrix;
use crate::error::{CoreError, Result};
use crate::rng::seeded;
use crate::scalar::Scalar;
use ndarray::Array2;
use rand::seq::SliceRandom;

use super::auc_from_scores;

const L2_PENALTY: f64 = 1e-4;
const EPOCHS: usize = 500;
const LEARNING_RATE: f64 = 0.1;

/// Full-batch gradient-descent logistic regression with L2 penalty; returns
/// the AUC on the held-out half of a stratified 50/50 split.
pub fn logistic_regression_auc<T: Scalar>(
    real: &EmbeddedMatrix<T>,
    synth: &EmbeddedMatrix<T>,
    seed: u64,
) -> Result<f64> {
    if real.width() != synth.width() {
        return Err(CoreError::InvalidArgument(
            "embedding widths differ in C2ST".into(),
        ));
    }
    if real.n_rows() < 20 || synth.n_rows() < 20 {
        return Err(CoreError::InvalidArgument(
            "C2ST needs at least 20 rows per side".into(),
        ));
    }

    let mut rng = seeded(seed);
    let split = |n: usize, rng: &mut crate::rng::SeededRng| -> (Vec<usize>, Vec<usize>) {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        let half = n / 2;
        (order[..half].to_vec(), order[half..].to_vec())
    };
    let (real_train, real_test) = split(real.n_rows(), &mut rng);
    let (synth_train, synth_test) = split(synth.n_rows(), &mut rng);

    let width = real.width();
    let mut features = Vec::<f64>::new();
    let mut labels = Vec::<f64>::new();
    let push_rows = |matrix: &Array2<T>, rows: &[usize], label: f64,
                         features: &mut Vec<f64>, labels: &mut Vec<f64>| {
        for &r in rows {
            features.extend(matrix.row(r).iter().map(|v| v.to_f64_lossy()));
            labels.push(label);
        }
    };
    push_rows(&real.data, &real_train, 0.0, &mut features, &mut labels);
    push_rows(&synth.data, &synth_train, 1.0, &mut features, &mut labels);
    let n_train = labels.len();
    let x_train = Array2::from_shape_vec((n_train, width), features).expect("shape");
    let y_train = labels;

    // weights + bias start at zero; deterministic full-batch descent
    let mut weights = vec![0.0f64; width];
    let mut bias = 0.0f64;
    for _ in 0..EPOCHS {
        let mut grad_w = vec![0.0f64; width];
        let mut grad_b = 0.0f64;
        for (i, row) in x_train.rows().into_iter().enumerate() {
            let z: f64 = row
                .iter()
                .zip(&weights)
                .map(|(x, w)| x * w)
                .sum::<f64>()
                + bias;
            let p = 1.0 / (1.0 + (-z).exp());
            let err = p - y_train[i];
            for (g, x) in grad_w.iter_mut().zip(row.iter()) {
                *g += err * x;
            }
            grad_b += err;
        }
        let n = n_train as f64;
        for (w, g) in weights.iter_mut().zip(&grad_w) {
            *w -= LEARNING_RATE * (g / n + L2_PENALTY * *w);
        }
        bias -= LEARNING_RATE * grad_b / n;
    }

    let mut scores = Vec::new();
    let mut test_labels = Vec::new();
    let score_rows = |matrix: &Array2<T>, rows: &[usize], label: f64,
                          scores: &mut Vec<f64>, test_labels: &mut Vec<f64>| {
        for &r in rows {
            let z: f64 = matrix
                .row(r)
                .iter()
                .zip(&weights)
                .map(|(x, w)| x.to_f64_lossy() * w)
                .sum::<f64>()
                + bias;
            scores.push(z);
            test_labels.push(label);
        }
    };
    score_rows(&real.data, &real_test, 0.0, &mut scores, &mut test_labels);
    score_rows(&synth.data, &synth_test, 1.0, &mut scores, &mut test_labels);

    Ok(auc_from_scores(&test_labels, &scores))
}

/// `100 * (1 - 2 * max(0, AUC - 0.5))`: 100 when the discriminator cannot
/// beat chance, 0 when it separates the sets perfectly.
pub fn c2st_score<T: Scalar>(
    real: &EmbeddedMatrix<T>,
    synth: &EmbeddedMatrix<T>,
    seed: u64,
) -> Result<f64> {
    let auc = logistic_regression_auc(real, synth, seed)?;
    Ok(100.0 * (1.0 - 2.0 * (auc - 0.5).max(0.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::normal_matrix;

    fn embedded(n: usize, d: usize, seed: u64, shift: f64) -> EmbeddedMatrix<f64> {
        EmbeddedMatrix {
            data: &normal_matrix::<f64, _>(&mut seeded(seed), n, d) + shift,
        }
    }

    #[test]
    fn identical_distributions_score_high() {
        let real = embedded(2000, 4, 1, 0.0);
        let synth = embedded(2000, 4, 2, 0.0);
        let score = c2st_score(&real, &synth, 7).unwrap();
        assert!(score >= 90.0, "score {score}");
    }

    #[test]
    fn shifted_distributions_score_near_zero() {
        let real = embedded(1000, 4, 3, 0.0);
        let synth = embedded(1000, 4, 4, 10.0);
        let score = c2st_score(&real, &synth, 7).unwrap();
        assert!(score <= 5.0, "score {score}");
    }

    #[test]
    fn same_seed_same_score() {
        let real = embedded(200, 3, 5, 0.0);
        let synth = embedded(200, 3, 6, 0.5);
        assert_eq!(
            c2st_score(&real, &synth, 42).unwrap(),
            c2st_score(&real, &synth, 42).unwrap()
        );
    }

    #[test]
    fn too_few_rows_is_an_error() {
        let real = embedded(10, 2, 7, 0.0);
        let synth = embedded(100, 2, 8, 0.0);
        assert!(c2st_score(&real, &synth, 0).is_err());
    }
}
