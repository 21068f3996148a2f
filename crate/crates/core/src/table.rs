//! In-memory table with kind-checked cells and interned category tokens.

use crate::error::{CoreError, Result};
use crate::schema::{validate_columns, ColumnKind, ColumnSchema};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Index into a table's token pool.
pub type TokenId = u32;

/// A single cell. Timestamps are integer epoch seconds so temporal diffs are
/// exact integers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Cell {
    Number(f64),
    Category(TokenId),
    Timestamp(i64),
    Missing,
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }
}

/// Borrowed cell value used when building tables.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellValue<'a> {
    Number(f64),
    Category(&'a str),
    Timestamp(i64),
    Missing,
}

/// Table-scoped string interner for category tokens.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Interner {
    tokens: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, TokenId>,
}

impl Interner {
    pub fn intern(&mut self, token: &str) -> TokenId {
        if self.index.is_empty() && !self.tokens.is_empty() {
            self.rebuild_index();
        }
        if let Some(&id) = self.index.get(token) {
            return id;
        }
        let id = self.tokens.len() as TokenId;
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), id);
        id
    }

    pub fn get(&self, id: TokenId) -> &str {
        &self.tokens[id as usize]
    }

    fn rebuild_index(&mut self) {
        self.index = self
            .tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as TokenId))
            .collect();
    }
}

/// Mixed-type tabular dataset. Immutable after construction; conformance of
/// every cell to its column kind is checked when rows are pushed, so a Table
/// can never hold a kind-mismatched cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Table {
    schema: Vec<ColumnSchema>,
    interner: Interner,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn builder(schema: Vec<ColumnSchema>) -> Result<TableBuilder> {
        validate_columns(&schema)?;
        Ok(TableBuilder {
            table: Table {
                schema,
                interner: Interner::default(),
                rows: Vec::new(),
            },
        })
    }

    pub fn schema(&self) -> &[ColumnSchema] {
        &self.schema
    }

    pub(crate) fn schema_mut(&mut self) -> &mut [ColumnSchema] {
        &mut self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_columns(&self) -> usize {
        self.schema.len()
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn cell(&self, row: usize, col: usize) -> Cell {
        self.rows[row][col]
    }

    pub fn token(&self, id: TokenId) -> &str {
        self.interner.get(id)
    }

    /// Category token of a cell, if it is one.
    pub fn category_str(&self, cell: Cell) -> Option<&str> {
        match cell {
            Cell::Category(id) => Some(self.interner.get(id)),
            _ => None,
        }
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.schema
            .iter()
            .position(|c| c.name == name)
            .ok_or_else(|| CoreError::UnknownColumn(name.to_string()))
    }

    pub fn column_schema(&self, name: &str) -> Result<&ColumnSchema> {
        let idx = self.column_index(name)?;
        Ok(&self.schema[idx])
    }

    /// All cells of one column, in row order.
    pub fn column(&self, idx: usize) -> impl Iterator<Item = Cell> + '_ {
        self.rows.iter().map(move |r| r[idx])
    }

    /// Numeric view of a column: numbers as-is, timestamps as seconds.
    pub fn numeric_column(&self, idx: usize) -> Result<Vec<f64>> {
        let col = &self.schema[idx];
        self.column(idx)
            .enumerate()
            .map(|(row, cell)| match cell {
                Cell::Number(v) => Ok(v),
                Cell::Timestamp(s) => Ok(s as f64),
                Cell::Missing => Err(CoreError::MissingCell {
                    row,
                    column: col.name.clone(),
                }),
                Cell::Category(_) => Err(CoreError::KindMismatch {
                    column: col.name.clone(),
                    expected: "numeric".into(),
                    actual: "categorical".into(),
                }),
            })
            .collect()
    }

    /// Category tokens of a column.
    pub fn categorical_column(&self, idx: usize) -> Result<Vec<&str>> {
        let col = &self.schema[idx];
        self.column(idx)
            .enumerate()
            .map(|(row, cell)| match cell {
                Cell::Category(id) => Ok(self.interner.get(id)),
                Cell::Missing => Err(CoreError::MissingCell {
                    row,
                    column: col.name.clone(),
                }),
                _ => Err(CoreError::KindMismatch {
                    column: col.name.clone(),
                    expected: "categorical".into(),
                    actual: self.schema[idx].kind.to_string(),
                }),
            })
            .collect()
    }

    /// Owned cell value for cross-table work (tokens resolved to strings).
    pub fn cell_value(&self, row: usize, col: usize) -> CellValue<'_> {
        match self.rows[row][col] {
            Cell::Number(v) => CellValue::Number(v),
            Cell::Category(id) => CellValue::Category(self.interner.get(id)),
            Cell::Timestamp(s) => CellValue::Timestamp(s),
            Cell::Missing => CellValue::Missing,
        }
    }

    /// New table with the same schema holding the given subset of rows.
    pub fn select_rows(&self, indices: &[usize]) -> Table {
        Table {
            schema: self.schema.clone(),
            interner: self.interner.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
        }
    }

    /// True when any cell in the given columns is missing.
    pub fn has_missing_in(&self, column_indices: &[usize]) -> Option<(usize, String)> {
        for (row_idx, row) in self.rows.iter().enumerate() {
            for &c in column_indices {
                if row[c].is_missing() {
                    return Some((row_idx, self.schema[c].name.clone()));
                }
            }
        }
        None
    }
}

pub struct TableBuilder {
    table: Table,
}

impl TableBuilder {
    pub fn push_row(&mut self, cells: &[CellValue<'_>]) -> Result<()> {
        if cells.len() != self.table.schema.len() {
            return Err(CoreError::Schema(format!(
                "row has {} cells, schema has {} columns",
                cells.len(),
                self.table.schema.len()
            )));
        }
        let row_idx = self.table.rows.len();
        let mut row = Vec::with_capacity(cells.len());
        for (col, value) in self.table.schema.iter().zip(cells) {
            let cell = match (col.kind, value) {
                (_, CellValue::Missing) => Cell::Missing,
                (ColumnKind::Numeric, CellValue::Number(v)) => Cell::Number(*v),
                (ColumnKind::Categorical, CellValue::Category(tok)) => {
                    Cell::Category(self.table.interner.intern(tok))
                }
                (ColumnKind::Datetime, CellValue::Timestamp(s)) => Cell::Timestamp(*s),
                _ => {
                    return Err(CoreError::CellParse {
                        row: row_idx,
                        column: col.name.clone(),
                        message: format!("cell kind does not match column kind {}", col.kind),
                    })
                }
            };
            row.push(cell);
        }
        self.table.rows.push(row);
        Ok(())
    }

    pub fn finish(self) -> Table {
        self.table
    }
}
