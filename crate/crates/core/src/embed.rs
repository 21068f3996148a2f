//! Shared embedded representation for distribution-level metrics:
//! standardized numerics concatenated with one-hot categoricals, with the
//! codec always fitted on the real data. Synthetic tokens outside the real
//! vocabulary embed as an all-zero block rather than erroring.

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;
use crate::table::{Cell, Table};
use crate::vae::{fit_codec, CodecColumn, ColumnCodec};
use ndarray::Array2;
use std::collections::HashMap;

#[derive(Debug, Clone)]
pub struct EmbeddedMatrix<T: Scalar> {
    pub data: Array2<T>,
}

impl<T: Scalar> EmbeddedMatrix<T> {
    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn width(&self) -> usize {
        self.data.ncols()
    }
}

/// Embeds a table with a fitted codec, zero-filling out-of-vocabulary
/// category cells.
pub fn embed_lenient<T: Scalar>(codec: &ColumnCodec, table: &Table) -> Result<EmbeddedMatrix<T>> {
    if table.n_columns() != codec.columns.len() {
        return Err(CoreError::Schema(format!(
            "table has {} columns, codec was fitted on {}",
            table.n_columns(),
            codec.columns.len()
        )));
    }
    let offsets = codec.offsets();
    let vocab_index: Vec<Option<HashMap<&str, usize>>> = codec
        .columns
        .iter()
        .map(|c| match c {
            CodecColumn::Categorical { vocab } => Some(
                vocab
                    .iter()
                    .enumerate()
                    .map(|(i, t)| (t.as_str(), i))
                    .collect(),
            ),
            CodecColumn::Numeric { .. } => None,
        })
        .collect();

    let mut out = Array2::<T>::zeros((table.n_rows(), codec.dense_width()));
    for row in 0..table.n_rows() {
        for (col_idx, codec_col) in codec.columns.iter().enumerate() {
            let offset = offsets[col_idx];
            match (codec_col, table.cell(row, col_idx)) {
                (CodecColumn::Numeric { mean, std, .. }, Cell::Number(v)) => {
                    out[(row, offset)] = T::of((v - mean) / std);
                }
                (CodecColumn::Numeric { mean, std, .. }, Cell::Timestamp(ts)) => {
                    out[(row, offset)] = T::of((ts as f64 - mean) / std);
                }
                (CodecColumn::Categorical { .. }, Cell::Category(id)) => {
                    if let Some(index) = vocab_index[col_idx]
                        .as_ref()
                        .unwrap()
                        .get(table.token(id))
                    {
                        out[(row, offset + index)] = T::one();
                    }
                    // unseen token: leave the block at zero
                }
                _ => {
                    return Err(CoreError::MissingCell {
                        row,
                        column: codec.schema[col_idx].name.clone(),
                    })
                }
            }
        }
    }
    Ok(EmbeddedMatrix { data: out })
}

/// Fits the codec on `real` and embeds both tables with it.
pub fn embed_real_synth<T: Scalar>(
    real: &Table,
    synth: &Table,
) -> Result<(EmbeddedMatrix<T>, EmbeddedMatrix<T>)> {
    check_matching_schemas(real, synth)?;
    let codec = fit_codec(real)?;
    Ok((
        embed_lenient(&codec, real)?,
        embed_lenient(&codec, synth)?,
    ))
}

/// Same names and kinds in the same order.
pub fn check_matching_schemas(a: &Table, b: &Table) -> Result<()> {
    if a.n_columns() != b.n_columns() {
        return Err(CoreError::Schema(format!(
            "column count mismatch: {} vs {}",
            a.n_columns(),
            b.n_columns()
        )));
    }
    for (ca, cb) in a.schema().iter().zip(b.schema()) {
        if ca.name != cb.name || ca.kind != cb.kind {
            return Err(CoreError::Schema(format!(
                "schema mismatch at column '{}' vs '{}'",
                ca.name, cb.name
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::ColumnSchema;
    use crate::table::CellValue;

    fn table(values: &[(f64, &str)]) -> Table {
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
    fn real_and_synth_share_the_codec() {
        let real = table(&[(1.0, "A"), (3.0, "B")]);
        let synth = table(&[(2.0, "B"), (2.0, "A")]);
        let (er, es) = embed_real_synth::<f64>(&real, &synth).unwrap();
        assert_eq!(er.width(), 3); // 1 numeric + 2 vocab
        assert_eq!(es.width(), 3);
        // real mean 2, std 1 -> synth x=2 standardizes to 0
        assert_eq!(es.data[(0, 0)], 0.0);
    }

    #[test]
    fn unseen_tokens_embed_as_zeros() {
        let real = table(&[(1.0, "A"), (3.0, "B")]);
        let synth = table(&[(1.0, "NEW")]);
        let codec = fit_codec(&real).unwrap();
        let e = embed_lenient::<f64>(&codec, &synth).unwrap();
        assert_eq!(e.data[(0, 1)], 0.0);
        assert_eq!(e.data[(0, 2)], 0.0);
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let real = table(&[(1.0, "A")]);
        let schema = vec![ColumnSchema::numeric("other", "")];
        let mut b = Table::builder(schema).unwrap();
        b.push_row(&[CellValue::Number(1.0)]).unwrap();
        assert!(embed_real_synth::<f64>(&real, &b.finish()).is_err());
    }
}
