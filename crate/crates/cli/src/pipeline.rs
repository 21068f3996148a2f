//! Stage implementations behind the subcommands: infer, fit, sample,
//! evaluate, pipeline, and the interpolation baseline.

use crate::config::{BackendKind, PipelineConfig, SplitMethod};
use crate::error::{AppError, Result};
use crate::manifest::Manifest;
use std::path::{Path, PathBuf};
use tabflow_core::checkpoint;
use tabflow_core::compress::{compress, decompress_with_stats, DecompressionContext};
use tabflow_core::csv_io::{load_csv, write_csv};
use tabflow_core::diffusion::{sample as sample_latents, train_score, NoiseSchedule, SamplerConfig};
use tabflow_core::metrics::{evaluate_all, EvaluationReport, MetricsConfig, SynthSource};
use tabflow_core::metrics::UtilityConfig;
use tabflow_core::relspec::RelationshipSpec;
use tabflow_core::rng::derive_seed;
use tabflow_core::smote::{smote_generate, SmoteConfig};
use tabflow_core::split::{split_train_test, split_train_test_ordered};
use tabflow_core::table::Table;
use tabflow_core::vae::{decode, encode, fit_codec, train_vae, ColumnCodec, EncodeMode, LatentMatrix};
use tabflow_core::{Real, ScoreModel, VaeModel};
use tabflow_reasoner::{
    build_prompt, infer_relationships_detailed, merge_specs, HttpLlmClient, InferenceThresholds,
    ReasonerBackend, ReasoningTask,
};

pub const REPORT_SCHEMA: &str = include_str!("../assets/report.schema.json");

pub struct LoadedData {
    pub train: Table,
    pub test: Table,
}

pub fn load_data(config: &PipelineConfig) -> Result<LoadedData> {
    let table = load_csv(&config.data.csv, &config.data.schema)?;
    let (train, test) = match config.data.split {
        SplitMethod::Random => {
            split_train_test(&table, config.data.test_fraction, config.data.split_seed)?
        }
        SplitMethod::Ordered => split_train_test_ordered(&table, config.data.test_fraction)?,
    };
    Ok(LoadedData { train, test })
}

fn ensure_output_dir(config: &PipelineConfig) -> Result<()> {
    std::fs::create_dir_all(&config.output_dir)?;
    Ok(())
}

/// Stage 1: infer relationships, validate against the training split, write
/// `relationships.json` and `validation_report.json`.
pub fn run_infer(config: &PipelineConfig) -> Result<RelationshipSpec> {
    ensure_output_dir(config)?;
    let data = load_data(config)?;
    let thresholds = InferenceThresholds {
        rel_tol: config.validation.rel_tol,
        max_violation_fraction: config.validation.max_violation_fraction,
    };
    let bundle = build_prompt(data.train.schema(), ReasoningTask::All);

    let (spec, mut dropped, report) = match config.reasoner.backend {
        BackendKind::RuleFile => {
            let path = config
                .reasoner
                .rule_file
                .clone()
                .ok_or_else(|| AppError::config("rule_file backend needs a rule file".into()))?;
            let outcome = infer_relationships_detailed(
                &ReasonerBackend::RuleFile(path),
                &bundle,
                &data.train,
                thresholds,
            )?;
            (outcome.spec, outcome.dropped, outcome.report)
        }
        BackendKind::Http => {
            let mut client = match &config.reasoner.endpoint {
                Some(endpoint) => HttpLlmClient::new(
                    endpoint.clone(),
                    config
                        .reasoner
                        .model
                        .clone()
                        .or_else(|| std::env::var("TABFLOW_LLM_MODEL").ok())
                        .unwrap_or_else(|| "gpt-4".into()),
                    "TABFLOW_LLM_TOKEN".into(),
                    config.reasoner.temperature,
                ),
                None => HttpLlmClient::from_env()?,
            };
            client.temperature = config.reasoner.temperature;
            let outcome = infer_relationships_detailed(
                &ReasonerBackend::HttpLlm(client),
                &bundle,
                &data.train,
                thresholds,
            )?;
            // expert rule file supplied alongside the LLM: take the union,
            // rule-file groups first
            if let Some(rule_file) = &config.reasoner.rule_file {
                let rules = infer_relationships_detailed(
                    &ReasonerBackend::RuleFile(rule_file.clone()),
                    &bundle,
                    &data.train,
                    thresholds,
                )?;
                let (merged, conflicts) = merge_specs(&rules.spec, &outcome.spec, &data.train);
                let mut dropped = rules.dropped;
                dropped.extend(outcome.dropped);
                dropped.extend(conflicts);
                let report = tabflow_core::relspec::validate_spec(
                    &merged,
                    &data.train,
                    thresholds.rel_tol,
                    thresholds.max_violation_fraction,
                )?;
                (merged, dropped, report)
            } else {
                (outcome.spec, outcome.dropped, outcome.report)
            }
        }
    };

    if spec.is_empty() {
        log::warn!("empty relationship spec: the pipeline degrades to plain latent synthesis");
    }
    dropped.iter().for_each(|d| {
        log::warn!("dropped {}: {}", d.description, d.reason);
    });

    std::fs::write(config.relationships_path(), spec.to_json())?;
    let report_doc = serde_json::json!({
        "validation": report,
        "dropped": dropped,
    });
    std::fs::write(
        config.output_dir.join("validation_report.json"),
        serde_json::to_string_pretty(&report_doc)?,
    )?;
    Ok(spec)
}

/// Stage 2: compress, train the codec and the score network, write the
/// model bundle with a content-addressed manifest.
pub fn run_fit(config: &PipelineConfig) -> Result<()> {
    let relationships = config.relationships_path();
    if !relationships.exists() {
        return Err(AppError::config(format!(
            "relationship spec {} not found; run infer-relationships first",
            relationships.display()
        )));
    }
    let spec = RelationshipSpec::from_json(&std::fs::read_to_string(&relationships)?)?;
    let data = load_data(config)?;

    let (compressed, ctx) = compress(&data.train, &spec)?;
    let codec = fit_codec(&compressed)?;
    let vae: VaeModel = train_vae(&compressed, &codec, &config.vae)?;
    let latents = encode(&vae, &codec, &compressed, EncodeMode::Mean)?;
    let schedule: NoiseSchedule = NoiseSchedule::for_latents(&latents);
    let score: ScoreModel = train_score(&latents, &schedule, &config.diffusion)?;

    let bundle_dir = config.bundle_dir();
    std::fs::create_dir_all(&bundle_dir)?;
    checkpoint::save(&bundle_dir.join("codec.json"), "codec", &codec)?;
    checkpoint::save(&bundle_dir.join("vae.json"), "vae", &vae)?;
    checkpoint::save(&bundle_dir.join("diffusion.json"), "score", &score)?;
    std::fs::write(bundle_dir.join("context.json"), ctx.to_json())?;

    let mut manifest = Manifest::new();
    manifest.record_input("csv", &config.data.csv)?;
    manifest.record_input("schema", &config.data.schema)?;
    manifest.record_input("relationships", &relationships)?;
    for artifact in ["codec.json", "vae.json", "diffusion.json", "context.json"] {
        manifest.record_artifact(artifact, &bundle_dir.join(artifact))?;
    }
    manifest.seeds.insert("split".into(), config.data.split_seed);
    manifest.seeds.insert("vae".into(), config.vae.seed);
    manifest.seeds.insert("diffusion".into(), config.diffusion.seed);
    manifest.seeds.insert("sampler".into(), config.sampler.seed);
    manifest.save(&bundle_dir.join("manifest.json"))?;
    Ok(())
}

pub struct Bundle {
    pub codec: ColumnCodec,
    pub vae: VaeModel,
    pub score: ScoreModel,
    pub ctx: DecompressionContext,
    pub manifest: Manifest,
}

pub fn load_bundle(config: &PipelineConfig) -> Result<Bundle> {
    let bundle_dir = config.bundle_dir();
    let manifest_path = bundle_dir.join("manifest.json");
    if !manifest_path.exists() {
        return Err(AppError::config(format!(
            "model bundle {} not found; run fit first",
            bundle_dir.display()
        )));
    }
    let manifest = Manifest::load(&manifest_path)?;
    manifest.verify_inputs(&[
        ("csv", config.data.csv.as_path()),
        ("schema", config.data.schema.as_path()),
        ("relationships", config.relationships_path().as_path()),
    ])?;
    let codec: ColumnCodec = checkpoint::load(&bundle_dir.join("codec.json"), "codec")?;
    let vae: VaeModel = checkpoint::load(&bundle_dir.join("vae.json"), "vae")?;
    let score: ScoreModel = checkpoint::load(&bundle_dir.join("diffusion.json"), "score")?;
    let ctx = DecompressionContext::from_json(&std::fs::read_to_string(
        bundle_dir.join("context.json"),
    )?)?;
    Ok(Bundle {
        codec,
        vae,
        score,
        ctx,
        manifest,
    })
}

/// Stage 3: sample latents, decode, decompress, write the synthetic CSV.
pub fn run_sample(config: &PipelineConfig, n_override: Option<usize>) -> Result<PathBuf> {
    let bundle = load_bundle(config)?;
    let n_rows = match n_override.or(config.n_samples) {
        Some(n) => n,
        None => load_data(config)?.train.n_rows(),
    };

    let sampler = SamplerConfig {
        steps: config.sampler.steps,
        mode: config.sampler.mode,
        seed: config.sampler.seed,
    };
    let raw = sample_latents(&bundle.score, &bundle.score.schedule, n_rows, &sampler)?;
    let latents = LatentMatrix::<Real> {
        data: raw,
        whitening: bundle.vae.whitening.clone(),
    };
    let compressed = decode(&bundle.vae, &bundle.codec, &latents)?;
    let (synth, stats) = decompress_with_stats(&compressed, &bundle.ctx)?;
    if stats.clamped_diffs > 0 {
        log::info!(
            "clamped {} of {} generated temporal diffs to the training floor",
            stats.clamped_diffs,
            stats.rows
        );
    }
    let path = config.synthetic_path();
    write_csv(&synth, &path)?;
    Ok(path)
}

/// Stage 4: run the evaluation framework against a synthetic CSV; writes the
/// report as JSON and flat CSV plus the report schema.
pub fn run_evaluate(
    config: &PipelineConfig,
    synth_path: &Path,
    report_stem: &str,
) -> Result<EvaluationReport> {
    ensure_output_dir(config)?;
    let data = load_data(config)?;
    let synth = load_csv(synth_path, &config.data.schema)?;

    let spec = {
        let path = config.relationships_path();
        if path.exists() {
            Some(RelationshipSpec::from_json(&std::fs::read_to_string(path)?)?)
        } else {
            None
        }
    };
    let ctx = {
        let bundle_dir = config.bundle_dir();
        if bundle_dir.join("manifest.json").exists() {
            Some(load_bundle(config)?.ctx)
        } else {
            None
        }
    };

    let metrics_config = MetricsConfig {
        base_seed: config.metrics.base_seed,
        rel_tol: config.metrics.rel_tol,
        gmm_components: config.metrics.gmm_components,
        dsi_columns: config.metrics.dsi_columns.clone(),
        utility: config.metrics.utility.as_ref().map(|u| UtilityConfig {
            target: u.target.clone(),
            task: u.task,
        }),
    };
    let report = evaluate_all(
        &data.train,
        &data.test,
        &SynthSource::Fixed(&synth),
        spec.as_ref(),
        ctx.as_ref(),
        &metrics_config,
        config.metrics.runs,
    )?;

    std::fs::write(
        config.output_dir.join(format!("{report_stem}.json")),
        report.to_json(),
    )?;
    std::fs::write(
        config.output_dir.join(format!("{report_stem}.csv")),
        report.render_csv(),
    )?;
    std::fs::write(config.output_dir.join("report.schema.json"), REPORT_SCHEMA)?;
    Ok(report)
}

/// Renders the per-dimension normalized summary for stdout.
pub fn render_summary(report: &EvaluationReport) -> String {
    let mut out = String::from("dimension            score\n");
    for (dimension, score) in report.dimension_summary() {
        out.push_str(&format!("{dimension:<20} {score:6.2}\n"));
    }
    out.push_str("\nmetric details (mean\u{b1}std over runs):\n");
    for group in &report.dimensions {
        for metric in &group.metrics {
            out.push_str(&format!(
                "  {:<12} {:<22} {}\n",
                group.dimension,
                metric.name,
                metric.formatted()
            ));
        }
    }
    out
}

/// Stages end to end, reusing existing artifacts where their inputs match.
pub fn run_pipeline(config: &PipelineConfig) -> Result<EvaluationReport> {
    ensure_output_dir(config)?;
    if config.relationships_path().exists() {
        log::info!("reusing existing {}", config.relationships_path().display());
    } else {
        run_infer(config)?;
    }

    let manifest_path = config.bundle_dir().join("manifest.json");
    let bundle_reusable = manifest_path.exists()
        && Manifest::load(&manifest_path).is_ok_and(|m| {
            m.verify_inputs(&[
                ("csv", config.data.csv.as_path()),
                ("schema", config.data.schema.as_path()),
                ("relationships", config.relationships_path().as_path()),
            ])
            .is_ok()
        });
    if bundle_reusable {
        log::info!("reusing existing model bundle");
    } else {
        run_fit(config)?;
    }

    let synth_path = run_sample(config, None)?;
    let report = run_evaluate(config, &synth_path, "report")?;

    if config.baseline_smote {
        let baseline_path = run_baseline_smote(config, None)?;
        run_evaluate(config, &baseline_path, "report_smote")?;
    }
    Ok(report)
}

/// Generates the interpolation-baseline synthetic CSV.
pub fn run_baseline_smote(config: &PipelineConfig, n_override: Option<usize>) -> Result<PathBuf> {
    ensure_output_dir(config)?;
    let data = load_data(config)?;
    let n_samples = n_override
        .or(config.n_samples)
        .unwrap_or(data.train.n_rows());
    let smote_config = SmoteConfig {
        k_neighbors: 5,
        n_samples,
        seed: derive_seed(config.metrics.base_seed, 0x5307e),
    };
    let synth = smote_generate(&data.train, &smote_config)?;
    let path = config.output_dir.join("smote_synthetic.csv");
    write_csv(&synth, &path)?;
    Ok(path)
}
