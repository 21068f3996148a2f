//! Relationship inference over serialized column descriptions.
//!
//! Two interchangeable backends produce a relationship spec: a
//! chat-completion HTTP endpoint (any OpenAI-style server) and an offline
//! rule file in the same JSON format. Whatever the backend claims is then
//! validated against the actual data; groups that reference unknown columns,
//! break structural invariants, or fail the violation-fraction thresholds
//! are dropped and logged rather than trusted.

mod error;
mod extract;
mod http;

pub use error::{ReasonerError, Result};
pub use extract::extract_json_object;
pub use http::{call_llm, HttpLlmClient};

use serde_json::Value;
use std::path::PathBuf;
use tabflow_core::formula::parse_formula;
use tabflow_core::relspec::{
    validate_spec, DerivedColumn, HierarchyGroup, MathGroup, RelationshipSpec, TemporalChain,
    ValidationReport,
};
use tabflow_core::schema::ColumnSchema;
use tabflow_core::serialize::{serialize_columns, SerializedColumn};
use tabflow_core::table::Table;

/// What to ask the backend for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReasoningTask {
    Hierarchy,
    Math,
    Temporal,
    All,
}

/// System prompt, task instructions, and the serialized column lines.
/// Only names and descriptions are embedded; cell values never leave the
/// process through prompts.
#[derive(Debug, Clone)]
pub struct PromptBundle {
    pub general_prompt: String,
    pub instructions: String,
    pub serialized_columns: Vec<SerializedColumn>,
}

#[derive(Debug, Clone)]
pub enum ReasonerBackend {
    HttpLlm(HttpLlmClient),
    RuleFile(PathBuf),
}

const GENERAL_PROMPT: &str = include_str!("../assets/general.txt");
const HIERARCHY_PROMPT: &str = include_str!("../assets/hierarchy.txt");
const MATH_PROMPT: &str = include_str!("../assets/math.txt");
const TEMPORAL_PROMPT: &str = include_str!("../assets/temporal.txt");
const ALL_PROMPT: &str = include_str!("../assets/all.txt");

/// Builds the prompt for a task; column order is preserved.
pub fn build_prompt(schema: &[ColumnSchema], task: ReasoningTask) -> PromptBundle {
    assert!(!schema.is_empty(), "prompt needs at least one column");
    let instructions = match task {
        ReasoningTask::Hierarchy => HIERARCHY_PROMPT,
        ReasoningTask::Math => MATH_PROMPT,
        ReasoningTask::Temporal => TEMPORAL_PROMPT,
        ReasoningTask::All => ALL_PROMPT,
    };
    PromptBundle {
        general_prompt: GENERAL_PROMPT.trim().to_string(),
        instructions: instructions.trim().to_string(),
        serialized_columns: serialize_columns(schema),
    }
}

/// Validation thresholds applied to backend output.
#[derive(Debug, Clone, Copy)]
pub struct InferenceThresholds {
    pub rel_tol: f64,
    pub max_violation_fraction: f64,
}

impl Default for InferenceThresholds {
    fn default() -> Self {
        InferenceThresholds {
            rel_tol: 1e-6,
            max_violation_fraction: 0.01,
        }
    }
}

/// A group the reasoner proposed but the validator rejected.
#[derive(Debug, Clone, serde::Serialize)]
pub struct DroppedGroup {
    pub description: String,
    pub reason: String,
}

#[derive(Debug)]
pub struct InferenceOutcome {
    /// Groups that survived parsing, structural checks and data validation.
    pub spec: RelationshipSpec,
    pub dropped: Vec<DroppedGroup>,
    /// Validation of the surviving spec.
    pub report: ValidationReport,
}

/// Runs the backend and returns the validated surviving spec.
pub fn infer_relationships(
    backend: &ReasonerBackend,
    bundle: &PromptBundle,
    table: &Table,
    thresholds: InferenceThresholds,
) -> Result<RelationshipSpec> {
    Ok(infer_relationships_detailed(backend, bundle, table, thresholds)?.spec)
}

/// As [`infer_relationships`], also reporting what was dropped and why.
pub fn infer_relationships_detailed(
    backend: &ReasonerBackend,
    bundle: &PromptBundle,
    table: &Table,
    thresholds: InferenceThresholds,
) -> Result<InferenceOutcome> {
    let raw_text = match backend {
        ReasonerBackend::HttpLlm(client) => call_llm(client, bundle)?,
        ReasonerBackend::RuleFile(path) => std::fs::read_to_string(path)
            .map_err(|e| ReasonerError::RuleFile(format!("{}: {e}", path.display())))?,
    };
    let value = extract_json_object(&raw_text)?;
    let (candidates, mut dropped) = parse_candidate_groups(&value);
    let outcome = sift_candidates(candidates, table, thresholds, &mut dropped)?;
    Ok(outcome)
}

/// One candidate group of any kind, kept in proposal order.
enum Candidate {
    Hierarchy(HierarchyGroup),
    Math(MathGroup),
    Temporal(TemporalChain),
}

impl Candidate {
    fn describe(&self) -> String {
        match self {
            Candidate::Hierarchy(g) => format!("hierarchy '{}'", g.granular),
            Candidate::Math(g) => {
                let derived: Vec<&str> = g.derived.iter().map(|d| d.column.as_str()).collect();
                format!("math group deriving [{}]", derived.join(", "))
            }
            Candidate::Temporal(c) => format!("temporal chain [{}]", c.columns.join(" -> ")),
        }
    }
}

fn parse_candidate_groups(value: &Value) -> (Vec<Candidate>, Vec<DroppedGroup>) {
    let mut candidates = Vec::new();
    let mut dropped = Vec::new();

    for entry in value["hierarchies"].as_array().into_iter().flatten() {
        match serde_json::from_value::<HierarchyGroup>(entry.clone()) {
            Ok(group) => candidates.push(Candidate::Hierarchy(group)),
            Err(e) => dropped.push(DroppedGroup {
                description: format!("hierarchy entry {entry}"),
                reason: format!("unparsable: {e}"),
            }),
        }
    }

    for entry in value["math_groups"].as_array().into_iter().flatten() {
        match parse_math_group(entry) {
            Ok(group) => candidates.push(Candidate::Math(group)),
            Err(reason) => dropped.push(DroppedGroup {
                description: format!("math entry {entry}"),
                reason,
            }),
        }
    }

    for entry in value["temporal_chains"].as_array().into_iter().flatten() {
        match serde_json::from_value::<Vec<String>>(entry.clone()) {
            Ok(columns) => candidates.push(Candidate::Temporal(TemporalChain { columns })),
            Err(e) => dropped.push(DroppedGroup {
                description: format!("temporal entry {entry}"),
                reason: format!("unparsable: {e}"),
            }),
        }
    }
    (candidates, dropped)
}

fn parse_math_group(entry: &Value) -> std::result::Result<MathGroup, String> {
    let independents: Vec<String> = serde_json::from_value(entry["independents"].clone())
        .map_err(|e| format!("independents: {e}"))?;
    let mut derived = Vec::new();
    let Some(derived_entries) = entry["derived"].as_array() else {
        return Err("derived is not a list".into());
    };
    for d in derived_entries {
        let column = d["column"]
            .as_str()
            .ok_or_else(|| "derived column name missing".to_string())?
            .to_string();
        let formula_text = d["formula"]
            .as_str()
            .ok_or_else(|| format!("formula missing for '{column}'"))?;
        let formula =
            parse_formula(formula_text).map_err(|e| format!("formula for '{column}': {e}"))?;
        derived.push(DerivedColumn { column, formula });
    }
    Ok(MathGroup {
        independents,
        derived,
    })
}

/// Greedily accepts candidates whose addition keeps the combined spec
/// structurally sound and kind-correct, then drops groups failing data
/// validation at the configured thresholds.
fn sift_candidates(
    candidates: Vec<Candidate>,
    table: &Table,
    thresholds: InferenceThresholds,
    dropped: &mut Vec<DroppedGroup>,
) -> Result<InferenceOutcome> {
    let mut accepted = RelationshipSpec::default();
    for candidate in candidates {
        let description = candidate.describe();
        let mut trial = accepted.clone();
        match &candidate {
            Candidate::Hierarchy(g) => trial.hierarchies.push(g.clone()),
            Candidate::Math(g) => trial.math_groups.push(g.clone()),
            Candidate::Temporal(c) => trial.temporal_chains.push(c.clone()),
        }
        match trial.check_against(table) {
            Ok(()) => accepted = trial,
            Err(e) => {
                log::warn!("dropping {description}: {e}");
                dropped.push(DroppedGroup {
                    description,
                    reason: e.to_string(),
                });
            }
        }
    }

    // data validation pass: keep only groups under the violation threshold
    let report = validate_spec(
        &accepted,
        table,
        thresholds.rel_tol,
        thresholds.max_violation_fraction,
    )?;
    let mut surviving = accepted.clone();
    for group in report.groups.iter().filter(|g| !g.pass) {
        let reason = format!(
            "violation fraction {:.4} exceeds {:.4}",
            group.violation_fraction, thresholds.max_violation_fraction
        );
        log::warn!("dropping {} '{}': {reason}", kind_name(group.kind), group.label);
        dropped.push(DroppedGroup {
            description: format!("{} '{}'", kind_name(group.kind), group.label),
            reason,
        });
        match group.kind {
            tabflow_core::relspec::GroupKind::Hierarchy => {
                surviving.hierarchies.retain(|h| h.granular != group.label);
            }
            tabflow_core::relspec::GroupKind::Math => {
                for math in surviving.math_groups.iter_mut() {
                    math.derived.retain(|d| d.column != group.label);
                }
                surviving.math_groups.retain(|m| !m.derived.is_empty());
            }
            tabflow_core::relspec::GroupKind::Temporal => {
                surviving
                    .temporal_chains
                    .retain(|c| c.columns.join(" -> ") != group.label);
            }
        }
    }

    if surviving.is_empty() {
        log::warn!("no relationship groups survived validation; spec is empty");
    }
    let report = validate_spec(
        &surviving,
        table,
        thresholds.rel_tol,
        thresholds.max_violation_fraction,
    )?;
    Ok(InferenceOutcome {
        spec: surviving,
        dropped: std::mem::take(dropped),
        report,
    })
}

fn kind_name(kind: tabflow_core::relspec::GroupKind) -> &'static str {
    match kind {
        tabflow_core::relspec::GroupKind::Hierarchy => "hierarchy",
        tabflow_core::relspec::GroupKind::Math => "math condition",
        tabflow_core::relspec::GroupKind::Temporal => "temporal chain",
    }
}

/// Union of two specs: every group of `primary` plus each `secondary` group
/// that does not structurally conflict with what is already accepted.
/// Used when a rule file is supplied alongside an LLM backend.
pub fn merge_specs(
    primary: &RelationshipSpec,
    secondary: &RelationshipSpec,
    table: &Table,
) -> (RelationshipSpec, Vec<DroppedGroup>) {
    let mut merged = primary.clone();
    let mut dropped = Vec::new();
    let mut try_add = |candidate: Candidate, merged: &mut RelationshipSpec| {
        let description = candidate.describe();
        let mut trial = merged.clone();
        match &candidate {
            Candidate::Hierarchy(g) => trial.hierarchies.push(g.clone()),
            Candidate::Math(g) => trial.math_groups.push(g.clone()),
            Candidate::Temporal(c) => trial.temporal_chains.push(c.clone()),
        }
        match trial.check_against(table) {
            Ok(()) => *merged = trial,
            Err(e) => dropped.push(DroppedGroup {
                description,
                reason: format!("conflicts with rule-file groups: {e}"),
            }),
        }
    };
    for g in &secondary.hierarchies {
        try_add(Candidate::Hierarchy(g.clone()), &mut merged);
    }
    for g in &secondary.math_groups {
        try_add(Candidate::Math(g.clone()), &mut merged);
    }
    for c in &secondary.temporal_chains {
        try_add(Candidate::Temporal(c.clone()), &mut merged);
    }
    (merged, dropped)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tabflow_core::fixtures::retail_like;

    #[test]
    fn prompt_for_all_tasks_names_the_three_keys() {
        let (table, _) = retail_like(5, 0);
        let bundle = build_prompt(table.schema(), ReasoningTask::All);
        for key in ["hierarchies", "math_groups", "temporal_chains"] {
            assert!(bundle.instructions.contains(key), "missing {key}");
        }
        assert_eq!(bundle.serialized_columns.len(), table.n_columns());
    }

    #[test]
    fn temporal_prompt_mentions_only_chronological_ordering() {
        let (table, _) = retail_like(5, 0);
        let bundle = build_prompt(table.schema(), ReasoningTask::Temporal);
        assert!(bundle.instructions.contains("temporal_chains"));
        assert!(!bundle.instructions.contains("hierarchies"));
        assert!(!bundle.instructions.contains("math_groups"));
    }

    #[test]
    fn prompt_preserves_column_permutations() {
        let (table, _) = retail_like(5, 0);
        let mut reversed = table.schema().to_vec();
        reversed.reverse();
        let forward = build_prompt(table.schema(), ReasoningTask::All);
        let backward = build_prompt(&reversed, ReasoningTask::All);
        let mut flipped = backward.serialized_columns.clone();
        flipped.reverse();
        assert_eq!(forward.serialized_columns, flipped);
    }

    #[test]
    fn prompt_never_embeds_cell_values() {
        let (table, _) = retail_like(20, 1);
        let bundle = build_prompt(table.schema(), ReasoningTask::All);
        let everything = format!(
            "{}\n{}\n{}",
            bundle.general_prompt,
            bundle.instructions,
            bundle
                .serialized_columns
                .iter()
                .map(|c| c.text.clone())
                .collect::<Vec<_>>()
                .join("\n")
        );
        // cell tokens from the fixture must not appear anywhere in the prompt
        for token in ["Jakarta", "COMPLETE", "First Class"] {
            assert!(!everything.contains(token), "leaked value {token}");
        }
    }

    #[test]
    fn merge_keeps_primary_on_conflict() {
        let (table, spec) = retail_like(50, 2);
        let (merged, dropped) = merge_specs(&spec, &spec, &table);
        // every secondary group conflicts with its twin in primary
        assert_eq!(merged, spec);
        assert_eq!(
            dropped.len(),
            spec.hierarchies.len() + spec.math_groups.len() + spec.temporal_chains.len()
        );
    }
}
