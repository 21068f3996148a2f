//! Train/test partitioning.

use crate::error::{CoreError, Result};
use crate::table::Table;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Seeded random split into (train, test) with `test size = round(fraction * n)`.
pub fn split_train_test(table: &Table, test_fraction: f64, seed: u64) -> Result<(Table, Table)> {
    check_fraction(test_fraction, table.n_rows())?;
    let n = table.n_rows();
    let n_test = ((test_fraction * n as f64).round() as usize).min(n);
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut ChaCha12Rng::seed_from_u64(seed));
    let (test_idx, train_idx) = indices.split_at(n_test);
    let mut train_idx = train_idx.to_vec();
    let mut test_idx = test_idx.to_vec();
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((table.select_rows(&train_idx), table.select_rows(&test_idx)))
}

/// Order-preserving split: first rows train, last `round(fraction * n)` test.
pub fn split_train_test_ordered(table: &Table, test_fraction: f64) -> Result<(Table, Table)> {
    check_fraction(test_fraction, table.n_rows())?;
    let n = table.n_rows();
    let n_test = ((test_fraction * n as f64).round() as usize).min(n);
    let train_idx: Vec<usize> = (0..n - n_test).collect();
    let test_idx: Vec<usize> = (n - n_test..n).collect();
    Ok((table.select_rows(&train_idx), table.select_rows(&test_idx)))
}

fn check_fraction(test_fraction: f64, n_rows: usize) -> Result<()> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(CoreError::InvalidArgument(format!(
            "test fraction must be in (0, 1), got {test_fraction}"
        )));
    }
    if n_rows < 2 {
        return Err(CoreError::InvalidArgument(
            "need at least 2 rows to split".into(),
        ));
    }
    Ok(())
}
