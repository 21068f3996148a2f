//! Column schema types and the JSON schema-file format.

use crate::error::{CoreError, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColumnKind {
    Numeric,
    Categorical,
    Datetime,
}

impl std::fmt::Display for ColumnKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ColumnKind::Numeric => "numeric",
            ColumnKind::Categorical => "categorical",
            ColumnKind::Datetime => "datetime",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ColumnRole {
    #[default]
    Feature,
    Target,
}

/// One column of a table: name, free-text description, kind and role.
///
/// `decimal_places` is the display precision inferred for numeric columns at
/// ingestion (max fractional digits observed, capped at 9). Datetime columns
/// carry the input format string they were parsed with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSchema {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub kind: ColumnKind,
    #[serde(default)]
    pub role: ColumnRole,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decimal_places: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub datetime_format: Option<String>,
}

impl ColumnSchema {
    pub fn numeric(name: &str, description: &str) -> Self {
        Self {
            name: name.to_string(),
            description: description.to_string(),
            kind: ColumnKind::Numeric,
            role: ColumnRole::Feature,
            decimal_places: None,
            datetime_format: None,
        }
    }

    pub fn categorical(name: &str, description: &str) -> Self {
        Self {
            name: name.to_string(),
            description: description.to_string(),
            kind: ColumnKind::Categorical,
            role: ColumnRole::Feature,
            decimal_places: None,
            datetime_format: None,
        }
    }

    pub fn datetime(name: &str, description: &str, format: &str) -> Self {
        Self {
            name: name.to_string(),
            description: description.to_string(),
            kind: ColumnKind::Datetime,
            role: ColumnRole::Feature,
            decimal_places: None,
            datetime_format: Some(format.to_string()),
        }
    }

    pub fn with_role(mut self, role: ColumnRole) -> Self {
        self.role = role;
        self
    }
}

/// Checks the schema invariants: unique names, datetime columns carry a format.
pub fn validate_columns(columns: &[ColumnSchema]) -> Result<()> {
    let mut seen = HashSet::new();
    for col in columns {
        if !seen.insert(col.name.as_str()) {
            return Err(CoreError::Schema(format!(
                "duplicate column name '{}'",
                col.name
            )));
        }
        if col.kind == ColumnKind::Datetime && col.datetime_format.is_none() {
            return Err(CoreError::Schema(format!(
                "datetime column '{}' has no declared input format",
                col.name
            )));
        }
    }
    Ok(())
}

/// On-disk schema file: `{"columns":[...], "target": name?}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SchemaFile {
    pub columns: Vec<ColumnSchema>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
}

impl SchemaFile {
    pub fn load(path: &Path) -> Result<Vec<ColumnSchema>> {
        let text = std::fs::read_to_string(path)?;
        let file: SchemaFile = serde_json::from_str(&text)?;
        file.into_columns()
    }

    /// Applies the top-level `target` to the matching column's role.
    pub fn into_columns(self) -> Result<Vec<ColumnSchema>> {
        let mut columns = self.columns;
        if let Some(target) = &self.target {
            let col = columns
                .iter_mut()
                .find(|c| &c.name == target)
                .ok_or_else(|| {
                    CoreError::Schema(format!("target '{target}' is not a declared column"))
                })?;
            col.role = ColumnRole::Target;
        }
        validate_columns(&columns)?;
        Ok(columns)
    }
}
