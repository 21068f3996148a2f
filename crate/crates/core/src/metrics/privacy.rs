//! Distance to closest record: the share of synthetic rows strictly closer
//! (L1, embedded space) to the training set than to the held-out test set.
//! 50 is ideal; higher means memorization risk.

use crate::embed::EmbeddedMatrix;
use crate::error::{CoreError, Result};
use crate::scalar::Scalar;
use ndarray::ArrayView1;

fn min_l1_distance<T: Scalar>(row: &ArrayView1<T>, reference: &EmbeddedMatrix<T>) -> f64 {
    let mut best = f64::INFINITY;
    for candidate in reference.data.rows() {
        let mut total = 0.0;
        for (a, b) in row.iter().zip(candidate.iter()) {
            total += (a.to_f64_lossy() - b.to_f64_lossy()).abs();
            if total >= best {
                break;
            }
        }
        best = best.min(total);
    }
    best
}

/// Ties (equal minimum distances) count as "not closer to train".
pub fn dcr<T: Scalar>(
    synth: &EmbeddedMatrix<T>,
    real_train: &EmbeddedMatrix<T>,
    real_test: &EmbeddedMatrix<T>,
) -> Result<f64> {
    if synth.width() != real_train.width() || synth.width() != real_test.width() {
        return Err(CoreError::InvalidArgument(
            "embedding widths differ in DCR".into(),
        ));
    }
    if synth.n_rows() == 0 || real_train.n_rows() == 0 || real_test.n_rows() == 0 {
        return Err(CoreError::InvalidArgument("empty set in DCR".into()));
    }
    let mut closer = 0usize;
    for row in synth.data.rows() {
        let d_train = min_l1_distance(&row, real_train);
        let d_test = min_l1_distance(&row, real_test);
        if d_train < d_test {
            closer += 1;
        }
    }
    Ok(100.0 * closer as f64 / synth.n_rows() as f64)
}
