//! One JSON document drives a whole run; env vars are only for secrets.

use crate::error::{AppError, Result};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use tabflow_core::diffusion::{SamplerMode, ScoreTrainConfig};
use tabflow_core::metrics::UtilityTask;
use tabflow_core::vae::VaeConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SplitMethod {
    /// Seeded uniform split.
    #[default]
    Random,
    /// First rows train, last rows test (row order as on disk).
    Ordered,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DataConfig {
    pub csv: PathBuf,
    pub schema: PathBuf,
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub split: SplitMethod,
    #[serde(default)]
    pub split_seed: u64,
}

fn default_test_fraction() -> f64 {
    0.1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    RuleFile,
    Http,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct ReasonerConfig {
    #[serde(default)]
    pub backend: BackendKind,
    /// Rule file path (rule_file backend), or an extra rule file whose groups
    /// are merged with LLM output (http backend).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rule_file: Option<PathBuf>,
    /// Overrides TABFLOW_LLM_ENDPOINT.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub endpoint: Option<String>,
    /// Overrides TABFLOW_LLM_MODEL.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<String>,
    #[serde(default)]
    pub temperature: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ValidationConfig {
    pub rel_tol: f64,
    pub max_violation_fraction: f64,
}

impl Default for ValidationConfig {
    fn default() -> Self {
        ValidationConfig {
            rel_tol: 1e-6,
            max_violation_fraction: 0.01,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SamplerSettings {
    pub steps: usize,
    pub mode: SamplerMode,
    pub seed: u64,
}

impl Default for SamplerSettings {
    fn default() -> Self {
        SamplerSettings {
            steps: 50,
            mode: SamplerMode::Sde,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UtilitySettings {
    pub target: String,
    pub task: UtilityTask,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsSettings {
    #[serde(default)]
    pub base_seed: u64,
    #[serde(default = "default_metric_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_gmm_components")]
    pub gmm_components: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dsi_columns: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utility: Option<UtilitySettings>,
    #[serde(default = "default_runs")]
    pub runs: usize,
}

fn default_metric_rel_tol() -> f64 {
    1e-6
}

fn default_gmm_components() -> usize {
    3
}

fn default_runs() -> usize {
    1
}

impl Default for MetricsSettings {
    fn default() -> Self {
        MetricsSettings {
            base_seed: 0,
            rel_tol: default_metric_rel_tol(),
            gmm_components: default_gmm_components(),
            dsi_columns: None,
            utility: None,
            runs: default_runs(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub data: DataConfig,
    #[serde(default)]
    pub reasoner: ReasonerConfig,
    #[serde(default)]
    pub validation: ValidationConfig,
    #[serde(default)]
    pub vae: VaeConfig,
    #[serde(default)]
    pub diffusion: ScoreTrainConfig,
    #[serde(default)]
    pub sampler: SamplerSettings,
    #[serde(default)]
    pub metrics: MetricsSettings,
    /// Synthetic rows for `sample`/`pipeline`; defaults to the train size.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
    pub output_dir: PathBuf,
    /// Baseline interpolation generator toggle for `pipeline`.
    #[serde(default)]
    pub baseline_smote: bool,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AppError::config(format!("cannot read config {}: {e}", path.display())))?;
        let config: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| AppError::config(format!("invalid config {}: {e}", path.display())))?;
        config.check()?;
        Ok(config)
    }

    /// Referenced input files must exist up front.
    pub fn check(&self) -> Result<()> {
        for (what, path) in [("csv", &self.data.csv), ("schema", &self.data.schema)] {
            if !path.exists() {
                return Err(AppError::config(format!(
                    "{what} file {} does not exist",
                    path.display()
                )));
            }
        }
        if let Some(rule_file) = &self.reasoner.rule_file {
            if !rule_file.exists() {
                return Err(AppError::config(format!(
                    "rule file {} does not exist",
                    rule_file.display()
                )));
            }
        }
        if self.reasoner.backend == BackendKind::RuleFile && self.reasoner.rule_file.is_none() {
            return Err(AppError::config(
                "rule_file backend needs reasoner.rule_file".into(),
            ));
        }
        if !(self.data.test_fraction > 0.0 && self.data.test_fraction < 1.0) {
            return Err(AppError::config(format!(
                "test_fraction must be in (0, 1), got {}",
                self.data.test_fraction
            )));
        }
        Ok(())
    }

    pub fn relationships_path(&self) -> PathBuf {
        self.output_dir.join("relationships.json")
    }

    pub fn bundle_dir(&self) -> PathBuf {
        self.output_dir.join("bundle")
    }

    pub fn synthetic_path(&self) -> PathBuf {
        self.output_dir.join("synthetic.csv")
    }
}
