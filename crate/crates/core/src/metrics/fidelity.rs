//! Low-order fidelity: column-wise densities, pairwise correlations, and
//! range/vocabulary coverage.

use crate::error::{CoreError, Result};
use crate::schema::ColumnKind;
use crate::table::Table;
use std::collections::{BTreeMap, HashSet};

use super::sorted_quantile;

/// 100 minus the two-sample Kolmogorov-Smirnov distance (percent).
pub fn ks_complement(real: &[f64], synth: &[f64]) -> Result<f64> {
    if real.is_empty() || synth.is_empty() {
        return Err(CoreError::InvalidArgument("empty sample in KS test".into()));
    }
    let mut a = real.to_vec();
    let mut b = synth.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).expect("finite values"));
    b.sort_by(|x, y| x.partial_cmp(y).expect("finite values"));

    let (mut i, mut j) = (0usize, 0usize);
    let mut sup = 0.0f64;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&av), Some(&bv)) => av.min(bv),
            (Some(&av), None) => av,
            (None, Some(&bv)) => bv,
            (None, None) => break,
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        let fa = i as f64 / a.len() as f64;
        let fb = j as f64 / b.len() as f64;
        sup = sup.max((fa - fb).abs());
    }
    Ok(100.0 * (1.0 - sup))
}

/// 100 minus the total variation distance between category frequency tables
/// (percent), over the union of categories.
pub fn tv_complement<S: AsRef<str>>(real: &[S], synth: &[S]) -> Result<f64> {
    if real.is_empty() || synth.is_empty() {
        return Err(CoreError::InvalidArgument(
            "empty sample in TV distance".into(),
        ));
    }
    let mut p: BTreeMap<&str, f64> = BTreeMap::new();
    let mut q: BTreeMap<&str, f64> = BTreeMap::new();
    for t in real {
        *p.entry(t.as_ref()).or_insert(0.0) += 1.0;
    }
    for t in synth {
        *q.entry(t.as_ref()).or_insert(0.0) += 1.0;
    }
    let np = real.len() as f64;
    let nq = synth.len() as f64;
    let categories: HashSet<&str> = p.keys().chain(q.keys()).cloned().collect();
    let tv: f64 = categories
        .into_iter()
        .map(|c| (p.get(c).unwrap_or(&0.0) / np - q.get(c).unwrap_or(&0.0) / nq).abs())
        .sum::<f64>()
        / 2.0;
    Ok(100.0 * (1.0 - tv))
}

/// Unweighted column mean of KS complements (numeric, datetime as seconds)
/// and TV complements (categorical).
pub fn density_estimation_score(real: &Table, synth: &Table) -> Result<f64> {
    crate::embed::check_matching_schemas(real, synth)?;
    let mut total = 0.0;
    for (idx, col) in real.schema().iter().enumerate() {
        let score = match col.kind {
            ColumnKind::Numeric | ColumnKind::Datetime => {
                ks_complement(&real.numeric_column(idx)?, &synth.numeric_column(idx)?)?
            }
            ColumnKind::Categorical => tv_complement(
                &real.categorical_column(idx)?,
                &synth.categorical_column(idx)?,
            )?,
        };
        total += score;
    }
    Ok(total / real.n_columns() as f64)
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None; // constant column: correlation undefined
    }
    Some(sxy / (sxx.sqrt() * syy.sqrt()))
}

/// Bin labels by the real column's quartiles (nearest rank).
fn quartile_bins(real_values: &[f64], values: &[f64]) -> Vec<String> {
    let mut sorted = real_values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let q1 = sorted_quantile(&sorted, 0.25);
    let q2 = sorted_quantile(&sorted, 0.5);
    let q3 = sorted_quantile(&sorted, 0.75);
    values
        .iter()
        .map(|&v| {
            let bin = if v <= q1 {
                0
            } else if v <= q2 {
                1
            } else if v <= q3 {
                2
            } else {
                3
            };
            format!("q{bin}")
        })
        .collect()
}

/// Contingency similarity over joint category pairs.
fn contingency_similarity(
    real_a: &[String],
    real_b: &[String],
    synth_a: &[String],
    synth_b: &[String],
) -> f64 {
    let mut p: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    let mut q: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for (a, b) in real_a.iter().zip(real_b) {
        *p.entry((a, b)).or_insert(0.0) += 1.0;
    }
    for (a, b) in synth_a.iter().zip(synth_b) {
        *q.entry((a, b)).or_insert(0.0) += 1.0;
    }
    let np = real_a.len() as f64;
    let nq = synth_a.len() as f64;
    let keys: HashSet<(&str, &str)> = p.keys().chain(q.keys()).cloned().collect();
    let tv: f64 = keys
        .into_iter()
        .map(|k| (p.get(&k).unwrap_or(&0.0) / np - q.get(&k).unwrap_or(&0.0) / nq).abs())
        .sum::<f64>()
        / 2.0;
    100.0 * (1.0 - tv)
}

enum ColumnView {
    Numeric(Vec<f64>),
    Categorical(Vec<String>),
}

/// Mean pairwise-correlation preservation over all unordered column pairs:
/// Pearson agreement for numeric pairs, contingency similarity for
/// categorical pairs, and quartile-binned contingency for mixed pairs (or
/// when a Pearson correlation is undefined).
pub fn pairwise_correlation_score(real: &Table, synth: &Table) -> Result<f64> {
    crate::embed::check_matching_schemas(real, synth)?;
    if real.n_columns() < 2 {
        return Err(CoreError::InvalidArgument(
            "pairwise correlation needs at least 2 columns".into(),
        ));
    }

    let view = |table: &Table, idx: usize| -> Result<ColumnView> {
        Ok(match table.schema()[idx].kind {
            ColumnKind::Numeric | ColumnKind::Datetime => {
                ColumnView::Numeric(table.numeric_column(idx)?)
            }
            ColumnKind::Categorical => ColumnView::Categorical(
                table
                    .categorical_column(idx)?
                    .into_iter()
                    .map(str::to_string)
                    .collect(),
            ),
        })
    };
    let real_cols: Vec<ColumnView> = (0..real.n_columns())
        .map(|i| view(real, i))
        .collect::<Result<_>>()?;
    let synth_cols: Vec<ColumnView> = (0..synth.n_columns())
        .map(|i| view(synth, i))
        .collect::<Result<_>>()?;

    let mut total = 0.0;
    let mut pairs = 0usize;
    for i in 0..real.n_columns() {
        for j in i + 1..real.n_columns() {
            let score = match (&real_cols[i], &real_cols[j], &synth_cols[i], &synth_cols[j]) {
                (
                    ColumnView::Numeric(ri),
                    ColumnView::Numeric(rj),
                    ColumnView::Numeric(si),
                    ColumnView::Numeric(sj),
                ) => match (pearson(ri, rj), pearson(si, sj)) {
                    (Some(rho_r), Some(rho_s)) => 100.0 * (1.0 - (rho_r - rho_s).abs() / 2.0),
                    _ => {
                        log::warn!(
                            "constant column in pair ({}, {}); falling back to quartile binning",
                            real.schema()[i].name,
                            real.schema()[j].name
                        );
                        contingency_similarity(
                            &quartile_bins(ri, ri),
                            &quartile_bins(rj, rj),
                            &quartile_bins(ri, si),
                            &quartile_bins(rj, sj),
                        )
                    }
                },
                (
                    ColumnView::Categorical(ri),
                    ColumnView::Categorical(rj),
                    ColumnView::Categorical(si),
                    ColumnView::Categorical(sj),
                ) => contingency_similarity(ri, rj, si, sj),
                (
                    ColumnView::Numeric(ri),
                    ColumnView::Categorical(rj),
                    ColumnView::Numeric(si),
                    ColumnView::Categorical(sj),
                ) => contingency_similarity(
                    &quartile_bins(ri, ri),
                    rj,
                    &quartile_bins(ri, si),
                    sj,
                ),
                (
                    ColumnView::Categorical(ri),
                    ColumnView::Numeric(rj),
                    ColumnView::Categorical(si),
                    ColumnView::Numeric(sj),
                ) => contingency_similarity(
                    ri,
                    &quartile_bins(rj, rj),
                    si,
                    &quartile_bins(rj, sj),
                ),
                _ => unreachable!("schemas checked to match"),
            };
            total += score;
            pairs += 1;
        }
    }
    Ok(total / pairs as f64)
}

/// Average coverage: per numeric column the fraction of synthetic cells
/// inside the real [min, max]; per categorical column the fraction of
/// synthetic tokens found in the real vocabulary. 100 times the column mean.
pub fn coverage_score(real: &Table, synth: &Table) -> Result<f64> {
    crate::embed::check_matching_schemas(real, synth)?;
    let mut total = 0.0;
    for (idx, col) in real.schema().iter().enumerate() {
        let fraction = match col.kind {
            ColumnKind::Numeric | ColumnKind::Datetime => {
                let real_values = real.numeric_column(idx)?;
                let lo = real_values.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = real_values
                    .iter()
                    .cloned()
                    .fold(f64::NEG_INFINITY, f64::max);
                let synth_values = synth.numeric_column(idx)?;
                let inside = synth_values
                    .iter()
                    .filter(|&&v| v >= lo && v <= hi)
                    .count();
                inside as f64 / synth_values.len().max(1) as f64
            }
            ColumnKind::Categorical => {
                let vocab: HashSet<&str> = real.categorical_column(idx)?.into_iter().collect();
                let synth_tokens = synth.categorical_column(idx)?;
                let known = synth_tokens.iter().filter(|t| vocab.contains(**t)).count();
                known as f64 / synth_tokens.len().max(1) as f64
            }
        };
        total += fraction;
    }
    Ok(100.0 * total / real.n_columns() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::ColumnSchema;
    use crate::table::CellValue;

    #[test]
    fn ks_identical_and_disjoint() {
        assert_eq!(ks_complement(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 100.0);
        assert_eq!(ks_complement(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0]).unwrap(), 0.0);
    }

    #[test]
    fn ks_sup_on_partial_overlap() {
        // brute-force CDF sup over breakpoints = 0.25 -> 75
        let score = ks_complement(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 10.0]).unwrap();
        assert!((score - 75.0).abs() < 1e-9);
    }

    #[test]
    fn ks_is_symmetric() {
        let a = [1.0, 5.0, 2.2, 7.7, 3.3];
        let b = [0.5, 5.5, 2.0, 9.0];
        assert_eq!(
            ks_complement(&a, &b).unwrap(),
            ks_complement(&b, &a).unwrap()
        );
    }

    #[test]
    fn tv_identical_disjoint_and_mixed() {
        assert_eq!(tv_complement(&["A", "B"], &["B", "A"]).unwrap(), 100.0);
        assert_eq!(tv_complement(&["A"], &["B"]).unwrap(), 0.0);
        let score = tv_complement(&["A", "A", "B", "B"], &["A", "B", "B", "B"]).unwrap();
        assert!((score - 75.0).abs() < 1e-9);
    }

    #[test]
    fn tv_is_symmetric() {
        let a = ["x", "y", "y", "z"];
        let b = ["x", "x", "z"];
        assert_eq!(tv_complement(&a, &b).unwrap(), tv_complement(&b, &a).unwrap());
    }

    fn two_col(values: &[(f64, &str)]) -> Table {
        let schema = vec![
            ColumnSchema::numeric("x", ""),
            ColumnSchema::categorical("c", ""),
        ];
        let mut b = Table::builder(schema).unwrap();
        for (x, c) in values {
            b.push_row(&[CellValue::Number(*x), CellValue::Category(c)])
                .unwrap();
        }
        b.finish()
    }

    #[test]
    fn density_mean_over_columns() {
        let real = two_col(&[(1.0, "A"), (2.0, "B")]);
        let identical = two_col(&[(1.0, "A"), (2.0, "B")]);
        assert_eq!(density_estimation_score(&real, &identical).unwrap(), 100.0);

        // identical numeric column, disjoint categorical -> mean of 100 and 0
        let half = two_col(&[(1.0, "Z"), (2.0, "Z")]);
        assert_eq!(density_estimation_score(&real, &half).unwrap(), 50.0);
    }

    #[test]
    fn correlation_score_is_100_on_identical_tables() {
        let schema = vec![
            ColumnSchema::numeric("a", ""),
            ColumnSchema::numeric("b", ""),
        ];
        let mut b = Table::builder(schema).unwrap();
        for i in 0..10 {
            b.push_row(&[
                CellValue::Number(i as f64),
                CellValue::Number(2.0 * i as f64 + 1.0),
            ])
            .unwrap();
        }
        let t = b.finish();
        assert_eq!(pairwise_correlation_score(&t, &t).unwrap(), 100.0);
    }

    #[test]
    fn flipped_correlation_scores_zero() {
        let schema = vec![
            ColumnSchema::numeric("a", ""),
            ColumnSchema::numeric("b", ""),
        ];
        let mut real = Table::builder(schema.clone()).unwrap();
        let mut synth = Table::builder(schema).unwrap();
        for i in 0..10 {
            let x = i as f64;
            real.push_row(&[CellValue::Number(x), CellValue::Number(x)])
                .unwrap();
            synth
                .push_row(&[CellValue::Number(x), CellValue::Number(-x)])
                .unwrap();
        }
        // real rho = 1, synth rho = -1 -> |diff|/2 = 1 -> 0
        assert_eq!(
            pairwise_correlation_score(&real.finish(), &synth.finish()).unwrap(),
            0.0
        );
    }

    #[test]
    fn coverage_counts_out_of_range_cells() {
        let schema = vec![ColumnSchema::numeric("x", "")];
        let mut real = Table::builder(schema.clone()).unwrap();
        for i in 0..10 {
            real.push_row(&[CellValue::Number(i as f64)]).unwrap();
        }
        let real = real.finish();
        let mut synth = Table::builder(schema).unwrap();
        for i in 0..10 {
            // 3 of 10 cells outside [0, 9]
            let v = if i < 3 { 100.0 + i as f64 } else { i as f64 };
            synth.push_row(&[CellValue::Number(v)]).unwrap();
        }
        let synth = synth.finish();
        assert!((coverage_score(&real, &synth).unwrap() - 70.0).abs() < 1e-9);
        assert_eq!(coverage_score(&real, &real).unwrap(), 100.0);
    }
}
