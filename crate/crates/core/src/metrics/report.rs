//! Whole-framework evaluation: runs every metric, repeats stochastic ones
//! across seeded runs, and groups results into the six report dimensions.

use crate::compress::DecompressionContext;
use crate::embed::{embed_lenient, embed_real_synth};
use crate::error::Result;
use crate::relspec::{RelationshipSpec, TemporalChain};
use crate::rng::derive_seed;
use crate::schema::{ColumnKind, ColumnRole};
use crate::table::Table;
use crate::vae::fit_codec;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub use crate::gbdt::Task as UtilityTask;

use super::utility::UtilityConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub base_seed: u64,
    /// Relative tolerance for MDI formula conditions.
    pub rel_tol: f64,
    /// Mixture size for DSI.
    pub gmm_components: usize,
    /// Columns feeding DSI; defaults to all numeric columns plus the target.
    pub dsi_columns: Option<Vec<String>>,
    pub utility: Option<UtilityConfig>,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig {
            base_seed: 0,
            rel_tol: 1e-6,
            gmm_components: 3,
            dsi_columns: None,
            utility: None,
        }
    }
}

/// Either one fixed synthetic table, or a generator producing a fresh sample
/// per run (seeded with the run's derived seed).
pub enum SynthSource<'a> {
    Fixed(&'a Table),
    Generator(&'a dyn Fn(u64) -> Result<Table>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricSummary {
    pub name: String,
    pub mean: f64,
    pub std: f64,
    pub values: Vec<f64>,
}

impl MetricSummary {
    /// `"96.46±0.03"`-style rendering.
    pub fn formatted(&self) -> String {
        format!("{:.2}\u{b1}{:.2}", self.mean, self.std)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DimensionGroup {
    pub dimension: String,
    pub metrics: Vec<MetricSummary>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub runs: usize,
    pub dimensions: Vec<DimensionGroup>,
}

pub const DIMENSIONS: [&str; 6] = [
    "accuracy",
    "diversity",
    "consistency",
    "dependency",
    "utility",
    "privacy",
];

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn metric(&self, dimension: &str, name: &str) -> Option<&MetricSummary> {
        self.dimensions
            .iter()
            .find(|d| d.dimension == dimension)?
            .metrics
            .iter()
            .find(|m| m.name == name)
    }

    /// Flat CSV: metric, dimension, mean, std.
    pub fn render_csv(&self) -> String {
        let mut out = String::from("metric,dimension,mean,std\n");
        for group in &self.dimensions {
            for metric in &group.metrics {
                out.push_str(&format!(
                    "{},{},{},{}\n",
                    metric.name, group.dimension, metric.mean, metric.std
                ));
            }
        }
        out
    }

    /// Per-dimension mean of the 0-100 metrics (raw error metrics skipped).
    pub fn dimension_summary(&self) -> Vec<(String, f64)> {
        self.dimensions
            .iter()
            .filter_map(|group| {
                let scored: Vec<f64> = group
                    .metrics
                    .iter()
                    .filter(|m| m.name != "rmse" && m.name != "mae")
                    .map(|m| m.mean)
                    .collect();
                if scored.is_empty() {
                    None
                } else {
                    Some((
                        group.dimension.clone(),
                        scored.iter().sum::<f64>() / scored.len() as f64,
                    ))
                }
            })
            .collect()
    }
}

fn default_dsi_columns(real: &Table) -> Vec<String> {
    let mut columns: Vec<String> = real
        .schema()
        .iter()
        .filter(|c| c.kind == ColumnKind::Numeric)
        .map(|c| c.name.clone())
        .collect();
    if let Some(target) = real.schema().iter().find(|c| c.role == ColumnRole::Target) {
        if !columns.contains(&target.name) {
            columns.push(target.name.clone());
        }
    }
    columns
}

fn chains_from_ctx(ctx: &DecompressionContext) -> Vec<TemporalChain> {
    ctx.temporal_layouts
        .iter()
        .map(|layout| {
            let mut columns = vec![layout.base.clone()];
            columns.extend(layout.originals.iter().cloned());
            TemporalChain { columns }
        })
        .collect()
}

/// Runs the full framework `runs` times (seeds derived from the base seed)
/// and reports mean and standard deviation per metric.
pub fn evaluate_all(
    real_train: &Table,
    real_test: &Table,
    synth: &SynthSource<'_>,
    spec: Option<&RelationshipSpec>,
    ctx: Option<&DecompressionContext>,
    config: &MetricsConfig,
    runs: usize,
) -> Result<EvaluationReport> {
    assert!(runs >= 1, "need at least one evaluation run");
    let mut collected: BTreeMap<(usize, String), Vec<f64>> = BTreeMap::new();
    let dimension_index =
        |name: &str| DIMENSIONS.iter().position(|d| *d == name).expect("known dimension");

    // relationship structures: explicit spec wins, else recovered from ctx
    let hierarchy_maps = match (ctx, spec) {
        (Some(ctx), _) => ctx.hierarchy_maps.clone(),
        (None, Some(spec)) if !spec.hierarchies.is_empty() => {
            super::relationship::hierarchy_maps_from_table(real_train, &spec.hierarchies)?
        }
        _ => Vec::new(),
    };
    let math_groups = match (spec, ctx) {
        (Some(spec), _) => spec.math_groups.clone(),
        (None, Some(ctx)) => ctx.math_groups.clone(),
        _ => Vec::new(),
    };
    let chains = match (spec, ctx) {
        (Some(spec), _) => spec.temporal_chains.clone(),
        (None, Some(ctx)) => chains_from_ctx(ctx),
        _ => Vec::new(),
    };
    let abs_tol = ctx
        .map(|c| c.derived_abs_tolerances())
        .unwrap_or_default();

    let quantile_grid = super::default_quantile_grid();
    let dsi_columns = config
        .dsi_columns
        .clone()
        .unwrap_or_else(|| default_dsi_columns(real_train));

    let embed_codec = fit_codec(real_train)?;
    let test_embedded = embed_lenient::<f64>(&embed_codec, real_test)?;

    let mut owned_synth: Table;
    for run in 0..runs {
        let seed = derive_seed(config.base_seed, run as u64);
        let synth_table: &Table = match synth {
            SynthSource::Fixed(table) => table,
            SynthSource::Generator(generate) => {
                owned_synth = generate(seed)?;
                &owned_synth
            }
        };

        let record = |dimension: &str, name: &str, value: f64,
                          collected: &mut BTreeMap<(usize, String), Vec<f64>>| {
            collected
                .entry((dimension_index(dimension), name.to_string()))
                .or_default()
                .push(value);
        };

        let (real_embedded, synth_embedded) = embed_real_synth::<f64>(real_train, synth_table)?;

        // accuracy
        record(
            "accuracy",
            "density_estimation",
            super::density_estimation_score(real_train, synth_table)?,
            &mut collected,
        );
        record(
            "accuracy",
            "pairwise_correlation",
            super::pairwise_correlation_score(real_train, synth_table)?,
            &mut collected,
        );
        record(
            "accuracy",
            "alpha_precision",
            super::alpha_precision(&real_embedded, &synth_embedded, &quantile_grid)?,
            &mut collected,
        );
        record(
            "accuracy",
            "c2st",
            super::c2st_score(&real_embedded, &synth_embedded, seed)?,
            &mut collected,
        );

        // diversity
        record(
            "diversity",
            "coverage",
            super::coverage_score(real_train, synth_table)?,
            &mut collected,
        );
        record(
            "diversity",
            "beta_recall",
            super::beta_recall(&real_embedded, &synth_embedded, &quantile_grid)?,
            &mut collected,
        );

        // consistency
        if !hierarchy_maps.is_empty() {
            record(
                "consistency",
                "hcs",
                super::hcs(synth_table, &hierarchy_maps)?,
                &mut collected,
            );
        }

        // dependency
        if !math_groups.is_empty() || !chains.is_empty() {
            record(
                "dependency",
                "mdi",
                super::mdi(synth_table, &math_groups, &chains, config.rel_tol, &abs_tol)?,
                &mut collected,
            );
        }
        if !dsi_columns.is_empty() {
            record(
                "dependency",
                "dsi",
                super::dsi(
                    real_train,
                    synth_table,
                    &dsi_columns,
                    config.gmm_components,
                    seed,
                )?,
                &mut collected,
            );
        }

        // utility
        if let Some(utility_config) = &config.utility {
            let outcome = super::ml_efficiency(synth_table, real_test, utility_config, seed)?;
            for (name, value) in outcome.metrics {
                record("utility", &name, value, &mut collected);
            }
        }

        // privacy
        record(
            "privacy",
            "dcr",
            super::dcr(&synth_embedded, &real_embedded, &test_embedded)?,
            &mut collected,
        );
    }

    let mut dimensions: Vec<DimensionGroup> = DIMENSIONS
        .iter()
        .map(|name| DimensionGroup {
            dimension: name.to_string(),
            metrics: Vec::new(),
        })
        .collect();
    for ((dim_idx, name), values) in collected {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
        dimensions[dim_idx].metrics.push(MetricSummary {
            name,
            mean,
            std,
            values,
        });
    }
    Ok(EvaluationReport { runs, dimensions })
}
