//! CSV ingestion (RFC-4180, UTF-8, header required) and emission.

use crate::error::{CoreError, Result};
use crate::schema::{ColumnKind, ColumnSchema, SchemaFile};
use crate::table::{Cell, CellValue, Table};
use chrono::{NaiveDate, NaiveDateTime};
use std::collections::HashMap;
use std::path::Path;

/// Loads a CSV against a JSON schema file.
///
/// The header must cover exactly the declared columns; cells parse per the
/// declared kind, empty cells become missing. Numeric columns get
/// `decimal_places` set to the max count of fractional digits observed
/// (capped at 9).
pub fn load_csv(path: &Path, schema_path: &Path) -> Result<Table> {
    let columns = SchemaFile::load(schema_path)?;
    load_csv_with_schema(path, columns)
}

pub fn load_csv_with_schema(path: &Path, columns: Vec<ColumnSchema>) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();

    let mut by_name: HashMap<&str, &ColumnSchema> =
        columns.iter().map(|c| (c.name.as_str(), c)).collect();
    if by_name.len() != columns.len() {
        return Err(CoreError::Schema("duplicate column names in schema".into()));
    }

    // Table columns follow CSV header order.
    let mut ordered: Vec<ColumnSchema> = Vec::with_capacity(headers.len());
    let mut seen = std::collections::HashSet::new();
    for h in headers.iter() {
        if !seen.insert(h) {
            return Err(CoreError::Schema(format!("duplicate CSV column '{h}'")));
        }
        let col = by_name
            .remove(h)
            .ok_or_else(|| CoreError::UnknownColumn(h.to_string()))?;
        ordered.push(col.clone());
    }
    if let Some(missing) = by_name.keys().next() {
        return Err(CoreError::Schema(format!(
            "schema column '{missing}' not present in CSV header"
        )));
    }

    let mut decimals: Vec<u32> = vec![0; ordered.len()];
    let mut builder = Table::builder(ordered.clone())?;

    for (row_idx, record) in reader.records().enumerate() {
        let record = record?;
        let mut cells: Vec<CellValue> = Vec::with_capacity(ordered.len());
        for (col_idx, col) in ordered.iter().enumerate() {
            let raw = record.get(col_idx).unwrap_or("");
            if raw.is_empty() {
                cells.push(CellValue::Missing);
                continue;
            }
            let value = match col.kind {
                ColumnKind::Numeric => {
                    let v: f64 = raw.trim().parse().map_err(|e| CoreError::CellParse {
                        row: row_idx,
                        column: col.name.clone(),
                        message: format!("'{raw}' is not numeric: {e}"),
                    })?;
                    decimals[col_idx] = decimals[col_idx].max(fractional_digits(raw.trim()));
                    CellValue::Number(v)
                }
                ColumnKind::Categorical => CellValue::Category(raw),
                ColumnKind::Datetime => {
                    let format = col.datetime_format.as_deref().unwrap_or("%Y-%m-%d");
                    let epoch =
                        parse_datetime(raw.trim(), format).map_err(|e| CoreError::CellParse {
                            row: row_idx,
                            column: col.name.clone(),
                            message: e,
                        })?;
                    CellValue::Timestamp(epoch)
                }
            };
            cells.push(value);
        }
        builder.push_row(&cells)?;
    }

    let mut table = builder.finish();
    for (col_idx, col) in table_schema_mut(&mut table).iter_mut().enumerate() {
        if col.kind == ColumnKind::Numeric {
            col.decimal_places = Some(decimals[col_idx].min(9));
        }
    }
    Ok(table)
}

// Schema is fixed after construction except for ingest-time decimal inference.
fn table_schema_mut(table: &mut Table) -> &mut [ColumnSchema] {
    table.schema_mut()
}

/// Count of digits after the decimal point in a numeric literal (0 when none).
fn fractional_digits(raw: &str) -> u32 {
    let mantissa = raw.split(['e', 'E']).next().unwrap_or(raw);
    match mantissa.split_once('.') {
        Some((_, frac)) => frac.chars().filter(|c| c.is_ascii_digit()).count() as u32,
        None => 0,
    }
}

/// Parses a datetime string to epoch seconds (UTC), treating date-only
/// formats as midnight.
pub fn parse_datetime(raw: &str, format: &str) -> std::result::Result<i64, String> {
    if let Ok(dt) = NaiveDateTime::parse_from_str(raw, format) {
        return Ok(dt.and_utc().timestamp());
    }
    match NaiveDate::parse_from_str(raw, format) {
        Ok(d) => Ok(d.and_hms_opt(0, 0, 0).unwrap().and_utc().timestamp()),
        Err(e) => Err(format!("'{raw}' does not match format '{format}': {e}")),
    }
}

/// Formats epoch seconds with the given chrono format string.
pub fn format_datetime(epoch: i64, format: &str) -> String {
    chrono::DateTime::from_timestamp(epoch, 0)
        .map(|dt| dt.naive_utc().format(format).to_string())
        .unwrap_or_else(|| epoch.to_string())
}

/// Writes a table as CSV. Numbers use shortest round-trip formatting,
/// timestamps the column's declared format, missing cells are empty.
pub fn write_csv(table: &Table, path: &Path) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    let names: Vec<&str> = table.schema().iter().map(|c| c.name.as_str()).collect();
    writer.write_record(&names)?;
    let mut record: Vec<String> = Vec::with_capacity(names.len());
    for row in 0..table.n_rows() {
        record.clear();
        for (col_idx, col) in table.schema().iter().enumerate() {
            let text = match table.cell(row, col_idx) {
                Cell::Number(v) => format_number(v),
                Cell::Category(id) => table.token(id).to_string(),
                Cell::Timestamp(s) => {
                    format_datetime(s, col.datetime_format.as_deref().unwrap_or("%Y-%m-%d"))
                }
                Cell::Missing => String::new(),
            };
            record.push(text);
        }
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

fn format_number(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::ColumnSchema;
    use std::io::Write;

    fn write_tmp(content: &str, suffix: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn loads_two_numeric_columns() {
        let csv = write_tmp("price,qty\n1.5,3\n2.25,4\n", ".csv");
        let schema = write_tmp(
            r#"{"columns":[
                {"name":"price","description":"unit price","kind":"numeric"},
                {"name":"qty","description":"count","kind":"numeric"}
            ]}"#,
            ".json",
        );
        let t = load_csv(csv.path(), schema.path()).unwrap();
        assert_eq!(t.n_rows(), 2);
        assert_eq!(t.schema()[0].decimal_places, Some(2));
        assert_eq!(t.schema()[1].decimal_places, Some(0));
        assert_eq!(t.cell(0, 0), Cell::Number(1.5));
    }

    #[test]
    fn parses_date_to_epoch() {
        // 2020-01-05T00:00:00Z
        assert_eq!(parse_datetime("2020-01-05", "%Y-%m-%d").unwrap(), 1578182400);
    }

    #[test]
    fn unknown_csv_column_is_an_error() {
        let csv = write_tmp("a,b\n1,2\n", ".csv");
        let schema = write_tmp(
            r#"{"columns":[{"name":"a","description":"","kind":"numeric"}]}"#,
            ".json",
        );
        let err = load_csv(csv.path(), schema.path()).unwrap_err();
        assert!(matches!(err, CoreError::UnknownColumn(c) if c == "b"));
    }

    #[test]
    fn unparsable_cell_reports_row_and_column() {
        let csv = write_tmp("a\n1\nxyz\n", ".csv");
        let schema = write_tmp(
            r#"{"columns":[{"name":"a","description":"","kind":"numeric"}]}"#,
            ".json",
        );
        let err = load_csv(csv.path(), schema.path()).unwrap_err();
        match err {
            CoreError::CellParse { row, column, .. } => {
                assert_eq!(row, 1);
                assert_eq!(column, "a");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn csv_round_trips_through_write_and_load() {
        let schema = vec![
            ColumnSchema::numeric("x", ""),
            ColumnSchema::categorical("c", ""),
            ColumnSchema::datetime("d", "", "%Y-%m-%d"),
        ];
        let mut b = Table::builder(schema.clone()).unwrap();
        b.push_row(&[
            CellValue::Number(1.25),
            CellValue::Category("A,with comma"),
            CellValue::Timestamp(1578182400),
        ])
        .unwrap();
        b.push_row(&[CellValue::Missing, CellValue::Category("B"), CellValue::Missing])
            .unwrap();
        let t = b.finish();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        write_csv(&t, &path).unwrap();
        let t2 = load_csv_with_schema(&path, schema).unwrap();
        assert_eq!(t2.n_rows(), 2);
        assert_eq!(t2.cell(0, 0), Cell::Number(1.25));
        assert_eq!(t2.category_str(t2.cell(0, 1)), Some("A,with comma"));
        assert_eq!(t2.cell(0, 2), Cell::Timestamp(1578182400));
        assert!(t2.cell(1, 0).is_missing());
    }
}
