//! Quantile-ball precision/recall in the shared embedded space.
//!
//! For each level `a` in the grid, a ball around the coordinatewise median of
//! the reference set with radius equal to the empirical `a`-quantile of
//! reference-to-center distances should contain a fraction `a` of the other
//! set. The score penalizes the mean absolute deviation from that ideal.

use crate::embed::EmbeddedMatrix;
use crate::error::{CoreError, Result};
use crate::scalar::Scalar;
use ndarray::{Array1, Array2};

use super::sorted_quantile;

/// `{0.05, 0.10, ..., 0.95}`.
pub fn default_quantile_grid() -> Vec<f64> {
    (1..=19).map(|i| i as f64 * 0.05).collect()
}

fn coordinatewise_median<T: Scalar>(data: &Array2<T>) -> Array1<f64> {
    let mut center = Array1::zeros(data.ncols());
    let mut scratch: Vec<f64> = Vec::with_capacity(data.nrows());
    for (j, slot) in center.iter_mut().enumerate() {
        scratch.clear();
        scratch.extend(data.column(j).iter().map(|v| v.to_f64_lossy()));
        scratch.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
        let n = scratch.len();
        *slot = if n % 2 == 1 {
            scratch[n / 2]
        } else {
            0.5 * (scratch[n / 2 - 1] + scratch[n / 2])
        };
    }
    center
}

fn distances_to<T: Scalar>(data: &Array2<T>, center: &Array1<f64>) -> Vec<f64> {
    data.rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .zip(center.iter())
                .map(|(v, c)| (v.to_f64_lossy() - c).powi(2))
                .sum::<f64>()
                .sqrt()
        })
        .collect()
}

fn quantile_ball_score<T: Scalar>(
    reference: &EmbeddedMatrix<T>,
    probe: &EmbeddedMatrix<T>,
    levels: &[f64],
) -> Result<f64> {
    if reference.width() != probe.width() {
        return Err(CoreError::InvalidArgument(format!(
            "embedding widths differ: {} vs {}",
            reference.width(),
            probe.width()
        )));
    }
    if reference.n_rows() == 0 || probe.n_rows() == 0 {
        return Err(CoreError::InvalidArgument("empty embedded matrix".into()));
    }
    let center = coordinatewise_median(&reference.data);
    let mut reference_distances = distances_to(&reference.data, &center);
    reference_distances.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
    let probe_distances = distances_to(&probe.data, &center);

    let mut deviation = 0.0;
    for &level in levels {
        let radius = sorted_quantile(&reference_distances, level);
        let covered = probe_distances.iter().filter(|&&d| d <= radius).count() as f64
            / probe_distances.len() as f64;
        deviation += (covered - level).abs();
    }
    deviation /= levels.len() as f64;
    Ok(100.0 * (1.0 - 2.0 * deviation).max(0.0))
}

/// Local similarity of synthetic points to the real distribution.
pub fn alpha_precision<T: Scalar>(
    real: &EmbeddedMatrix<T>,
    synth: &EmbeddedMatrix<T>,
    alphas: &[f64],
) -> Result<f64> {
    quantile_ball_score(real, synth, alphas)
}

/// Coverage of the real distribution by the synthetic set (roles swapped).
pub fn beta_recall<T: Scalar>(
    real: &EmbeddedMatrix<T>,
    synth: &EmbeddedMatrix<T>,
    betas: &[f64],
) -> Result<f64> {
    quantile_ball_score(synth, real, betas)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{normal_matrix, seeded};

    fn embedded(n: usize, d: usize, seed: u64) -> EmbeddedMatrix<f64> {
        EmbeddedMatrix {
            data: normal_matrix::<f64, _>(&mut seeded(seed), n, d),
        }
    }

    #[test]
    fn self_comparison_scores_high() {
        let real = embedded(10_000, 3, 1);
        let synth = EmbeddedMatrix {
            data: real.data.clone(),
        };
        let grid = default_quantile_grid();
        let precision = alpha_precision(&real, &synth, &grid).unwrap();
        let recall = beta_recall(&real, &synth, &grid).unwrap();
        assert!(precision >= 95.0, "alpha precision {precision}");
        assert!(recall >= 95.0, "beta recall {recall}");
    }

    #[test]
    fn all_synth_outside_real_support_scores_zero() {
        let real = embedded(500, 2, 2);
        let synth = EmbeddedMatrix {
            data: &embedded(500, 2, 3).data + 1000.0,
        };
        let score = alpha_precision(&real, &synth, &default_quantile_grid()).unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn mode_collapse_on_the_center_scores_zero() {
        let real = embedded(500, 2, 4);
        // all synthetic points exactly at the real median: P(a) = 1 for all a
        let center = coordinatewise_median(&real.data);
        let mut data = ndarray::Array2::zeros((200, 2));
        for mut row in data.rows_mut() {
            row[0] = center[0];
            row[1] = center[1];
        }
        let synth = EmbeddedMatrix { data };
        let score = alpha_precision(&real, &synth, &default_quantile_grid()).unwrap();
        assert_eq!(score, 0.0);
    }

    #[test]
    fn spread_synth_recalls_better_than_collapsed_synth() {
        let real = embedded(2000, 2, 5);
        let spread = embedded(2000, 2, 6);
        let collapsed = EmbeddedMatrix {
            data: ndarray::Array2::zeros((2000, 2)),
        };
        let grid = default_quantile_grid();
        let spread_score = beta_recall(&real, &spread, &grid).unwrap();
        let collapsed_score = beta_recall(&real, &collapsed, &grid).unwrap();
        assert!(
            spread_score > collapsed_score,
            "{spread_score} vs {collapsed_score}"
        );
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let a = embedded(10, 2, 7);
        let b = embedded(10, 3, 8);
        assert!(alpha_precision(&a, &b, &default_quantile_grid()).is_err());
    }
}
