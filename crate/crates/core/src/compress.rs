//! Table compression under a relationship spec, and its inverse.
//!
//! Compression removes every column the relationships make redundant:
//! hierarchy ancestors (recoverable by granular-value lookup), derived math
//! columns (recomputable from their formulas), and all but the earliest
//! column of each temporal chain (replaced by consecutive diffs in seconds).
//! The [`DecompressionContext`] captures everything needed to invert the
//! transformation exactly.

use crate::error::{CoreError, Result};
use crate::formula::eval_formula;
use crate::relspec::{MathGroup, RelationshipSpec};
use crate::schema::ColumnSchema;
use crate::table::{Cell, CellValue, Table};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, HashMap};

/// A compressed table is an ordinary table over the reduced schema.
pub type CompressedTable = Table;

pub const CONTEXT_VERSION: u32 = 1;

/// Lookup from granular value to its ancestor tuple, with training counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyMap {
    pub granular: String,
    pub ancestors: Vec<String>,
    /// granular token -> one ancestor value per ancestor column
    pub map: BTreeMap<String, Vec<String>>,
    /// granular token -> training frequency
    pub counts: BTreeMap<String, u64>,
}

/// How one temporal chain was laid out in the compressed schema.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalLayout {
    pub base: String,
    /// Original chain columns after the base, in order.
    pub originals: Vec<String>,
    /// Diff column per original, same order.
    pub diff_columns: Vec<String>,
    /// Minimum positive training diff (seconds) per position; None when the
    /// training data had no positive diff at that position.
    pub min_positive_diffs: Vec<Option<i64>>,
}

/// Everything required to reconstruct the original schema from compressed
/// rows. Persisted as versioned JSON next to model checkpoints.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecompressionContext {
    pub version: u32,
    pub hierarchy_maps: Vec<HierarchyMap>,
    pub math_groups: Vec<MathGroup>,
    pub temporal_layouts: Vec<TemporalLayout>,
    /// Original schema in original order, for reassembly.
    pub original_schema: Vec<ColumnSchema>,
    /// Schema the generator must produce.
    pub compressed_schema: Vec<ColumnSchema>,
    /// Rounding precision for recomputed derived columns.
    pub derived_decimal_places: BTreeMap<String, u32>,
}

impl DecompressionContext {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("context serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ctx: DecompressionContext = serde_json::from_str(text)?;
        if ctx.version != CONTEXT_VERSION {
            return Err(CoreError::Checkpoint(format!(
                "unsupported decompression context version {}",
                ctx.version
            )));
        }
        Ok(ctx)
    }

    /// Absolute tolerance for each derived column implied by its rounding.
    pub fn derived_abs_tolerances(&self) -> BTreeMap<String, f64> {
        self.derived_decimal_places
            .iter()
            .map(|(name, &dp)| (name.clone(), 10f64.powi(-(dp as i32))))
            .collect()
    }
}

/// Counters reported by decompression.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct DecompressStats {
    /// Generated diffs raised to the training floor.
    pub clamped_diffs: usize,
    pub rows: usize,
}

fn diff_column_name(base: &str, position: usize) -> String {
    format!("dt__{base}__{position}")
}

/// Compresses `table` under `spec`.
///
/// The spec must already be validated against the table; referenced columns
/// must have no missing cells. Hierarchy maps are built by majority vote per
/// granular value with ties broken lexicographically on the ancestor tuple.
pub fn compress(
    table: &Table,
    spec: &RelationshipSpec,
) -> Result<(CompressedTable, DecompressionContext)> {
    spec.check_against(table)?;
    let referenced: Vec<usize> = spec
        .referenced_columns()
        .iter()
        .map(|name| table.column_index(name))
        .collect::<Result<_>>()?;
    if let Some((row, column)) = table.has_missing_in(&referenced) {
        return Err(CoreError::MissingCell { row, column });
    }

    let hierarchy_maps: Vec<HierarchyMap> = spec
        .hierarchies
        .iter()
        .map(|group| build_hierarchy_map(table, &group.granular, &group.ancestors))
        .collect::<Result<_>>()?;

    let mut derived_decimal_places = BTreeMap::new();
    for group in &spec.math_groups {
        for derived in &group.derived {
            let dp = table
                .column_schema(&derived.column)?
                .decimal_places
                .unwrap_or(9);
            derived_decimal_places.insert(derived.column.clone(), dp);
        }
    }

    // Columns to drop, and per-chain diff data.
    let mut dropped: std::collections::HashSet<&str> = std::collections::HashSet::new();
    for g in &spec.hierarchies {
        dropped.extend(g.ancestors.iter().map(String::as_str));
    }
    for g in &spec.math_groups {
        dropped.extend(g.derived.iter().map(|d| d.column.as_str()));
    }

    let mut temporal_layouts = Vec::new();
    // base column name -> (diff column schemas, per-position per-row diffs)
    let mut chain_data: HashMap<String, (Vec<ColumnSchema>, Vec<Vec<i64>>)> = HashMap::new();
    for chain in &spec.temporal_chains {
        let base = chain.columns[0].clone();
        let originals: Vec<String> = chain.columns[1..].to_vec();
        dropped.extend(chain.columns[1..].iter().map(String::as_str));

        let indices: Vec<usize> = chain
            .columns
            .iter()
            .map(|c| table.column_index(c))
            .collect::<Result<_>>()?;
        let mut per_position: Vec<Vec<i64>> =
            vec![Vec::with_capacity(table.n_rows()); originals.len()];
        for row in 0..table.n_rows() {
            let mut prev = timestamp_at(table, row, indices[0])?;
            for (pos, &idx) in indices[1..].iter().enumerate() {
                let ts = timestamp_at(table, row, idx)?;
                per_position[pos].push(ts - prev);
                prev = ts;
            }
        }
        let mut diff_schemas = Vec::new();
        let mut diff_names = Vec::new();
        let mut min_positive_diffs = Vec::new();
        for (pos, original) in originals.iter().enumerate() {
            let name = diff_column_name(&base, pos + 2);
            if table.column_index(&name).is_ok() {
                return Err(CoreError::InvalidSpec(format!(
                    "diff column name '{name}' collides with an existing column"
                )));
            }
            let mut schema = ColumnSchema::numeric(
                &name,
                &format!("seconds from previous chain column to {original}"),
            );
            schema.decimal_places = Some(0);
            diff_schemas.push(schema);
            diff_names.push(name);
            min_positive_diffs.push(per_position[pos].iter().filter(|&&d| d > 0).min().copied());
        }
        temporal_layouts.push(TemporalLayout {
            base: base.clone(),
            originals,
            diff_columns: diff_names,
            min_positive_diffs,
        });
        chain_data.insert(base, (diff_schemas, per_position));
    }

    // Compressed schema: surviving originals in order, diffs after their base.
    let mut compressed_schema: Vec<ColumnSchema> = Vec::new();
    for col in table.schema() {
        if dropped.contains(col.name.as_str()) {
            continue;
        }
        compressed_schema.push(col.clone());
        if let Some((diff_schemas, _)) = chain_data.get(&col.name) {
            compressed_schema.extend(diff_schemas.iter().cloned());
        }
    }

    let mut builder = Table::builder(compressed_schema.clone())?;
    for row in 0..table.n_rows() {
        let mut cells: Vec<CellValue> = Vec::with_capacity(compressed_schema.len());
        for (col_idx, col) in table.schema().iter().enumerate() {
            if dropped.contains(col.name.as_str()) {
                continue;
            }
            cells.push(table.cell_value(row, col_idx));
            if let Some((_, per_position)) = chain_data.get(&col.name) {
                for diffs in per_position {
                    cells.push(CellValue::Number(diffs[row] as f64));
                }
            }
        }
        builder.push_row(&cells)?;
    }
    let compressed = builder.finish();

    let ctx = DecompressionContext {
        version: CONTEXT_VERSION,
        hierarchy_maps,
        math_groups: spec.math_groups.clone(),
        temporal_layouts,
        original_schema: table.schema().to_vec(),
        compressed_schema,
        derived_decimal_places,
    };
    Ok((compressed, ctx))
}

fn timestamp_at(table: &Table, row: usize, col: usize) -> Result<i64> {
    match table.cell(row, col) {
        Cell::Timestamp(ts) => Ok(ts),
        _ => Err(CoreError::KindMismatch {
            column: table.schema()[col].name.clone(),
            expected: "datetime".into(),
            actual: "other".into(),
        }),
    }
}

fn build_hierarchy_map(table: &Table, granular: &str, ancestors: &[String]) -> Result<HierarchyMap> {
    let granular_idx = table.column_index(granular)?;
    let ancestor_idx: Vec<usize> = ancestors
        .iter()
        .map(|a| table.column_index(a))
        .collect::<Result<_>>()?;

    // granular token -> ancestor tuple -> count
    let mut votes: BTreeMap<String, BTreeMap<Vec<String>, u64>> = BTreeMap::new();
    for row in 0..table.n_rows() {
        let key = table
            .category_str(table.cell(row, granular_idx))
            .expect("granular cells checked categorical and non-missing")
            .to_string();
        let tuple: Vec<String> = ancestor_idx
            .iter()
            .map(|&idx| {
                table
                    .category_str(table.cell(row, idx))
                    .expect("ancestor cells checked categorical and non-missing")
                    .to_string()
            })
            .collect();
        *votes.entry(key).or_default().entry(tuple).or_insert(0) += 1;
    }

    let mut map = BTreeMap::new();
    let mut counts = BTreeMap::new();
    for (key, tuple_votes) in votes {
        let total: u64 = tuple_votes.values().sum();
        // max count wins; on equal counts the lexicographically smaller tuple
        let winner = tuple_votes
            .iter()
            .max_by(|a, b| a.1.cmp(b.1).then_with(|| b.0.cmp(a.0)))
            .map(|(tuple, _)| tuple.clone())
            .expect("at least one tuple per seen granular value");
        map.insert(key.clone(), winner);
        counts.insert(key, total);
    }
    Ok(HierarchyMap {
        granular: granular.to_string(),
        ancestors: ancestors.to_vec(),
        map,
        counts,
    })
}

/// Inverts [`compress`], logging clamp counts.
pub fn decompress(synth: &CompressedTable, ctx: &DecompressionContext) -> Result<Table> {
    let (table, stats) = decompress_with_stats(synth, ctx)?;
    if stats.clamped_diffs > 0 {
        log::info!(
            "decompression clamped {} generated diffs to the training floor",
            stats.clamped_diffs
        );
    }
    Ok(table)
}

/// Inverts [`compress`]: restores ancestors by lookup, recomputes derived
/// columns (rounded to their recorded precision), and rebuilds temporal
/// columns as cumulative clamped diffs from the base column.
pub fn decompress_with_stats(
    synth: &CompressedTable,
    ctx: &DecompressionContext,
) -> Result<(Table, DecompressStats)> {
    if synth.n_columns() != ctx.compressed_schema.len() {
        return Err(CoreError::Decompression(format!(
            "expected {} compressed columns, got {}",
            ctx.compressed_schema.len(),
            synth.n_columns()
        )));
    }
    for (actual, expected) in synth.schema().iter().zip(&ctx.compressed_schema) {
        if actual.name != expected.name || actual.kind != expected.kind {
            return Err(CoreError::Decompression(format!(
                "compressed schema mismatch at column '{}' (expected '{}' {})",
                actual.name, expected.name, expected.kind
            )));
        }
    }

    let mut stats = DecompressStats {
        rows: synth.n_rows(),
        ..Default::default()
    };

    struct HierarchyPlan<'a> {
        granular_idx: usize,
        map: &'a HierarchyMap,
    }
    let hierarchy_plans: Vec<HierarchyPlan> = ctx
        .hierarchy_maps
        .iter()
        .map(|m| {
            Ok(HierarchyPlan {
                granular_idx: synth.column_index(&m.granular)?,
                map: m,
            })
        })
        .collect::<Result<_>>()?;

    struct ChainPlan<'a> {
        base_idx: usize,
        diff_idx: Vec<usize>,
        layout: &'a TemporalLayout,
    }
    let chain_plans: Vec<ChainPlan> = ctx
        .temporal_layouts
        .iter()
        .map(|layout| {
            Ok(ChainPlan {
                base_idx: synth.column_index(&layout.base)?,
                diff_idx: layout
                    .diff_columns
                    .iter()
                    .map(|d| synth.column_index(d))
                    .collect::<Result<_>>()?,
                layout,
            })
        })
        .collect::<Result<_>>()?;

    let mut builder = Table::builder(ctx.original_schema.clone())?;
    let mut unknown_granular: Vec<(usize, String)> = Vec::new();

    for row in 0..synth.n_rows() {
        // name -> reconstructed cell for columns absent from synth
        let mut restored: HashMap<&str, CellOwned> = HashMap::new();

        for plan in &hierarchy_plans {
            let token = synth
                .category_str(synth.cell(row, plan.granular_idx))
                .ok_or_else(|| CoreError::MissingCell {
                    row,
                    column: plan.map.granular.clone(),
                })?;
            match plan.map.map.get(token) {
                Some(tuple) => {
                    for (ancestor, value) in plan.map.ancestors.iter().zip(tuple) {
                        restored.insert(ancestor.as_str(), CellOwned::Category(value.clone()));
                    }
                }
                None => unknown_granular.push((row, format!("{}={token}", plan.map.granular))),
            }
        }

        for plan in &chain_plans {
            let base = match synth.cell(row, plan.base_idx) {
                Cell::Timestamp(ts) => ts,
                _ => {
                    return Err(CoreError::MissingCell {
                        row,
                        column: plan.layout.base.clone(),
                    })
                }
            };
            let mut current = base;
            for (pos, &diff_idx) in plan.diff_idx.iter().enumerate() {
                let raw = match synth.cell(row, diff_idx) {
                    Cell::Number(v) => v,
                    _ => {
                        return Err(CoreError::MissingCell {
                            row,
                            column: plan.layout.diff_columns[pos].clone(),
                        })
                    }
                };
                let floor = plan.layout.min_positive_diffs[pos].unwrap_or(0) as f64;
                let clamped = if raw < floor {
                    stats.clamped_diffs += 1;
                    floor
                } else {
                    raw
                };
                current += clamped.round() as i64;
                if current < 0 {
                    return Err(CoreError::Decompression(format!(
                        "negative reconstructed timestamp for '{}' at row {row}",
                        plan.layout.originals[pos]
                    )));
                }
                restored.insert(
                    plan.layout.originals[pos].as_str(),
                    CellOwned::Timestamp(current),
                );
            }
        }

        for group in &ctx.math_groups {
            for derived in &group.derived {
                let value = eval_formula(&derived.formula, &mut |name| {
                    let idx = synth.column_index(name)?;
                    match synth.cell(row, idx) {
                        Cell::Number(v) => Ok(v),
                        _ => Err(CoreError::MissingCell {
                            row,
                            column: name.to_string(),
                        }),
                    }
                })?;
                let dp = *ctx.derived_decimal_places.get(&derived.column).unwrap_or(&9);
                restored.insert(
                    derived.column.as_str(),
                    CellOwned::Number(round_to(value, dp)),
                );
            }
        }

        if !unknown_granular.is_empty() {
            continue; // error reported after the scan, listing offenders
        }

        let cells: Vec<CellValue> = ctx
            .original_schema
            .iter()
            .map(|schema_col| {
                if let Some(owned) = restored.get(schema_col.name.as_str()) {
                    return owned.as_value();
                }
                let idx = synth
                    .column_index(&schema_col.name)
                    .expect("surviving column present in compressed schema");
                synth.cell_value(row, idx)
            })
            .collect();
        builder.push_row(&cells)?;
    }

    if !unknown_granular.is_empty() {
        let preview: Vec<String> = unknown_granular
            .iter()
            .take(10)
            .map(|(row, what)| format!("row {row}: {what}"))
            .collect();
        return Err(CoreError::Decompression(format!(
            "{} rows reference granular values absent from the hierarchy map ({})",
            unknown_granular.len(),
            preview.join("; ")
        )));
    }

    Ok((builder.finish(), stats))
}

enum CellOwned {
    Number(f64),
    Category(String),
    Timestamp(i64),
}

impl CellOwned {
    fn as_value(&self) -> CellValue<'_> {
        match self {
            CellOwned::Number(v) => CellValue::Number(*v),
            CellOwned::Category(s) => CellValue::Category(s),
            CellOwned::Timestamp(ts) => CellValue::Timestamp(*ts),
        }
    }
}

fn round_to(value: f64, decimal_places: u32) -> f64 {
    let scale = 10f64.powi(decimal_places as i32);
    (value * scale).round() / scale
}
