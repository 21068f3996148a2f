//! Relationship structures (hierarchies, math groups, temporal chains),
//! their JSON file format, and validation against real data.

use crate::error::{CoreError, Result};
use crate::formula::{eval_formula_at, parse_formula, FormulaExpr};
use crate::schema::ColumnKind;
use crate::table::{Cell, Table};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet, HashMap};

/// One hierarchical-consistency group: a granular column determines its
/// ancestor columns.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyGroup {
    pub granular: String,
    pub ancestors: Vec<String>,
}

/// A derived column with the formula that computes it from the group's
/// independents. Formulas travel as canonical strings in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedColumn {
    pub column: String,
    #[serde(with = "formula_string")]
    pub formula: FormulaExpr,
}

mod formula_string {
    use super::*;
    use serde::de::Error as DeError;
    use serde::{Deserializer, Serializer};

    pub fn serialize<S: Serializer>(expr: &FormulaExpr, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&expr.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<FormulaExpr, D::Error> {
        let text = String::deserialize(d)?;
        parse_formula(&text).map_err(D::Error::custom)
    }
}

/// One mathematical-dependency group: independent columns and the columns
/// derived from them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MathGroup {
    pub independents: Vec<String>,
    pub derived: Vec<DerivedColumn>,
}

/// Datetime columns in chronological order. Serializes as a bare array.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TemporalChain {
    pub columns: Vec<String>,
}

/// The reasoner's output and the compressor's input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RelationshipSpec {
    #[serde(default)]
    pub hierarchies: Vec<HierarchyGroup>,
    #[serde(default)]
    pub math_groups: Vec<MathGroup>,
    #[serde(default)]
    pub temporal_chains: Vec<TemporalChain>,
}

impl RelationshipSpec {
    pub fn is_empty(&self) -> bool {
        self.hierarchies.is_empty() && self.math_groups.is_empty() && self.temporal_chains.is_empty()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: RelationshipSpec = serde_json::from_str(text)?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    /// Structural invariants that hold without looking at data.
    ///
    /// A column may be reused across groups only as a math independent;
    /// granulars, ancestors, derived columns and chain members are exclusive.
    pub fn check_structure(&self) -> Result<()> {
        let mut exclusive: BTreeMap<String, &'static str> = BTreeMap::new();
        fn claim(
            name: &str,
            role: &'static str,
            exclusive: &mut BTreeMap<String, &'static str>,
        ) -> Result<()> {
            if let Some(prev) = exclusive.insert(name.to_string(), role) {
                return Err(CoreError::InvalidSpec(format!(
                    "column '{name}' appears as both {prev} and {role}"
                )));
            }
            Ok(())
        }

        for group in &self.hierarchies {
            if group.ancestors.is_empty() {
                return Err(CoreError::InvalidSpec(format!(
                    "hierarchy group '{}' has no ancestors",
                    group.granular
                )));
            }
            if group.ancestors.contains(&group.granular) {
                return Err(CoreError::InvalidSpec(format!(
                    "granular column '{}' listed among its own ancestors",
                    group.granular
                )));
            }
            claim(&group.granular, "hierarchy granular", &mut exclusive)?;
            for a in &group.ancestors {
                claim(a, "hierarchy ancestor", &mut exclusive)?;
            }
        }

        let mut independents_seen: BTreeSet<&str> = BTreeSet::new();
        for group in &self.math_groups {
            let independents: BTreeSet<&str> =
                group.independents.iter().map(String::as_str).collect();
            if independents.len() != group.independents.len() {
                return Err(CoreError::InvalidSpec(
                    "duplicate independent column in math group".into(),
                ));
            }
            for derived in &group.derived {
                if independents.contains(derived.column.as_str()) {
                    return Err(CoreError::InvalidSpec(format!(
                        "column '{}' is both independent and derived",
                        derived.column
                    )));
                }
                for referenced in derived.formula.columns() {
                    if !independents.contains(referenced.as_str()) {
                        return Err(CoreError::InvalidSpec(format!(
                            "formula for '{}' references '{referenced}' which is not an independent of its group",
                            derived.column
                        )));
                    }
                }
                claim(&derived.column, "math derived", &mut exclusive)?;
            }
            independents_seen.extend(independents);
        }

        for chain in &self.temporal_chains {
            if chain.columns.len() < 2 {
                return Err(CoreError::InvalidSpec(
                    "temporal chain needs at least 2 columns".into(),
                ));
            }
            for col in &chain.columns {
                claim(col, "temporal chain member", &mut exclusive)?;
            }
        }

        // Exclusive roles may not collide with independents either.
        for name in independents_seen {
            if let Some(role) = exclusive.get(name) {
                return Err(CoreError::InvalidSpec(format!(
                    "column '{name}' appears as both math independent and {role}"
                )));
            }
        }
        Ok(())
    }

    /// Structure plus existence/kind checks against a table.
    pub fn check_against(&self, table: &Table) -> Result<()> {
        self.check_structure()?;
        let expect_kind = |name: &str, kind: ColumnKind| -> Result<()> {
            let col = table.column_schema(name)?;
            if col.kind != kind {
                return Err(CoreError::KindMismatch {
                    column: name.to_string(),
                    expected: kind.to_string(),
                    actual: col.kind.to_string(),
                });
            }
            Ok(())
        };
        for group in &self.hierarchies {
            expect_kind(&group.granular, ColumnKind::Categorical)?;
            for a in &group.ancestors {
                expect_kind(a, ColumnKind::Categorical)?;
            }
        }
        for group in &self.math_groups {
            for name in &group.independents {
                expect_kind(name, ColumnKind::Numeric)?;
            }
            for derived in &group.derived {
                expect_kind(&derived.column, ColumnKind::Numeric)?;
            }
        }
        for chain in &self.temporal_chains {
            for col in &chain.columns {
                expect_kind(col, ColumnKind::Datetime)?;
            }
        }
        Ok(())
    }

    /// Every column any group touches, in spec order.
    pub fn referenced_columns(&self) -> Vec<String> {
        let mut out = Vec::new();
        let push = |name: &str, out: &mut Vec<String>| {
            if !out.iter().any(|n| n == name) {
                out.push(name.to_string());
            }
        };
        for g in &self.hierarchies {
            push(&g.granular, &mut out);
            for a in &g.ancestors {
                push(a, &mut out);
            }
        }
        for g in &self.math_groups {
            for i in &g.independents {
                push(i, &mut out);
            }
            for d in &g.derived {
                push(&d.column, &mut out);
            }
        }
        for c in &self.temporal_chains {
            for col in &c.columns {
                push(col, &mut out);
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupKind {
    Hierarchy,
    Math,
    Temporal,
}

/// Validation verdict for one relationship group.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupValidation {
    pub kind: GroupKind,
    /// Granular column, derived column, or joined chain columns.
    pub label: String,
    pub violation_fraction: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rel_tol: f64,
    pub max_violation_fraction: f64,
    pub groups: Vec<GroupValidation>,
}

impl ValidationReport {
    pub fn all_pass(&self) -> bool {
        self.groups.iter().all(|g| g.pass)
    }
}

/// Checks every group of `spec` against real rows.
///
/// Math formulas pass on a row when `|derived - eval| <= rel_tol * max(1, |derived|)`;
/// temporal chains when adjacent columns are nondecreasing; hierarchies report
/// the fraction of granular values mapping to more than one ancestor tuple.
/// Rows with missing referenced cells count as violations. A group passes iff
/// its violation fraction is at most `max_violation_fraction`.
pub fn validate_spec(
    spec: &RelationshipSpec,
    table: &Table,
    rel_tol: f64,
    max_violation_fraction: f64,
) -> Result<ValidationReport> {
    spec.check_against(table)?;
    let n = table.n_rows();
    let mut groups = Vec::new();

    for group in &spec.hierarchies {
        let violation_fraction = hierarchy_violation_fraction(table, group)?;
        groups.push(GroupValidation {
            kind: GroupKind::Hierarchy,
            label: group.granular.clone(),
            violation_fraction,
            pass: violation_fraction <= max_violation_fraction,
        });
    }

    for group in &spec.math_groups {
        for derived in &group.derived {
            let derived_idx = table.column_index(&derived.column)?;
            let mut violations = 0usize;
            for row in 0..n {
                let ok = match (table.cell(row, derived_idx), eval_formula_at(&derived.formula, table, row)) {
                    (Cell::Number(actual), Ok(expected)) => {
                        (actual - expected).abs() <= rel_tol * actual.abs().max(1.0)
                    }
                    _ => false,
                };
                if !ok {
                    violations += 1;
                }
            }
            let violation_fraction = fraction(violations, n);
            groups.push(GroupValidation {
                kind: GroupKind::Math,
                label: derived.column.clone(),
                violation_fraction,
                pass: violation_fraction <= max_violation_fraction,
            });
        }
    }

    for chain in &spec.temporal_chains {
        let indices: Vec<usize> = chain
            .columns
            .iter()
            .map(|c| table.column_index(c))
            .collect::<Result<_>>()?;
        let mut violations = 0usize;
        for row in 0..n {
            let mut ok = true;
            let mut prev: Option<i64> = None;
            for &idx in &indices {
                match table.cell(row, idx) {
                    Cell::Timestamp(ts) => {
                        if let Some(p) = prev {
                            if ts < p {
                                ok = false;
                                break;
                            }
                        }
                        prev = Some(ts);
                    }
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                violations += 1;
            }
        }
        let violation_fraction = fraction(violations, n);
        groups.push(GroupValidation {
            kind: GroupKind::Temporal,
            label: chain.columns.join(" -> "),
            violation_fraction,
            pass: violation_fraction <= max_violation_fraction,
        });
    }

    Ok(ValidationReport {
        rel_tol,
        max_violation_fraction,
        groups,
    })
}

fn hierarchy_violation_fraction(table: &Table, group: &HierarchyGroup) -> Result<f64> {
    let granular_idx = table.column_index(&group.granular)?;
    let ancestor_idx: Vec<usize> = group
        .ancestors
        .iter()
        .map(|a| table.column_index(a))
        .collect::<Result<_>>()?;

    // granular token -> set of distinct ancestor tuples (token ids are
    // table-scoped, so compare by id; -1 marks a missing ancestor cell).
    let mut tuples: HashMap<u32, BTreeSet<Vec<i64>>> = HashMap::new();
    let mut missing_granular = false;
    for row in 0..table.n_rows() {
        let key = match table.cell(row, granular_idx) {
            Cell::Category(id) => id,
            _ => {
                missing_granular = true;
                continue;
            }
        };
        let mut tuple = Vec::with_capacity(ancestor_idx.len());
        for &idx in &ancestor_idx {
            match table.cell(row, idx) {
                Cell::Category(id) => tuple.push(id as i64),
                _ => tuple.push(-1),
            }
        }
        tuples.entry(key).or_default().insert(tuple);
    }

    let total_values = tuples.len() + usize::from(missing_granular);
    let violating = tuples
        .values()
        .filter(|set| set.len() > 1 || set.iter().any(|t| t.contains(&-1)))
        .count()
        + usize::from(missing_granular);
    Ok(fraction(violating, total_values))
}

fn fraction(part: usize, whole: usize) -> f64 {
    if whole == 0 {
        0.0
    } else {
        part as f64 / whole as f64
    }
}
