//! The six-dimension evaluation framework: accuracy, diversity, consistency,
//! dependency, utility, privacy. Scores live on a 0-100 scale (higher is
//! better unless noted; DCR's ideal is 50) except raw regression errors.

mod c2st;
mod fidelity;
mod precision_recall;
mod privacy;
mod relationship;
mod report;
mod utility;

pub use c2st::{c2st_score, logistic_regression_auc};
pub use fidelity::{
    coverage_score, density_estimation_score, ks_complement, pairwise_correlation_score,
    tv_complement,
};
pub use precision_recall::{alpha_precision, beta_recall, default_quantile_grid};
pub use privacy::dcr;
pub use relationship::{dsi, hcs, mdi};
pub use report::{
    evaluate_all, DimensionGroup, EvaluationReport, MetricSummary, MetricsConfig, SynthSource,
    UtilityTask,
};
pub use utility::{ml_efficiency, MlEfficiency, UtilityConfig};

/// Rank-based AUC (Mann-Whitney with midranks for ties).
pub fn auc_from_scores(labels: &[f64], scores: &[f64]) -> f64 {
    assert_eq!(labels.len(), scores.len());
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).expect("finite scores"));

    let n_pos = labels.iter().filter(|&&y| y > 0.5).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return 0.5;
    }

    // midranks over tied score groups
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if labels[idx] > 0.5 {
                rank_sum_pos += midrank;
            }
        }
        i = j + 1;
    }
    let n_pos_f = n_pos as f64;
    let n_neg_f = n_neg as f64;
    (rank_sum_pos - n_pos_f * (n_pos_f + 1.0) / 2.0) / (n_pos_f * n_neg_f)
}

/// Binary F1 at a 0.5 probability threshold.
pub fn f1_binary(labels: &[f64], probabilities: &[f64]) -> f64 {
    let mut tp = 0.0;
    let mut fp = 0.0;
    let mut fn_ = 0.0;
    for (&y, &p) in labels.iter().zip(probabilities) {
        let predicted = p > 0.5;
        let actual = y > 0.5;
        match (predicted, actual) {
            (true, true) => tp += 1.0,
            (true, false) => fp += 1.0,
            (false, true) => fn_ += 1.0,
            (false, false) => {}
        }
    }
    if tp == 0.0 {
        return 0.0;
    }
    2.0 * tp / (2.0 * tp + fp + fn_)
}

pub fn rmse(actual: &[f64], predicted: &[f64]) -> f64 {
    let n = actual.len() as f64;
    (actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p) * (a - p))
        .sum::<f64>()
        / n)
        .sqrt()
}

pub fn mae(actual: &[f64], predicted: &[f64]) -> f64 {
    let n = actual.len() as f64;
    actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p).abs())
        .sum::<f64>()
        / n
}

/// Coefficient of determination (can be negative for bad fits).
pub fn r_squared(actual: &[f64], predicted: &[f64]) -> f64 {
    let n = actual.len() as f64;
    let mean = actual.iter().sum::<f64>() / n;
    let ss_res: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p) * (a - p))
        .sum();
    let ss_tot: f64 = actual.iter().map(|a| (a - mean) * (a - mean)).sum();
    if ss_tot == 0.0 {
        return if ss_res == 0.0 { 1.0 } else { 0.0 };
    }
    1.0 - ss_res / ss_tot
}

/// Empirical quantile by the nearest-rank rule on a pre-sorted slice.
pub(crate) fn sorted_quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}
