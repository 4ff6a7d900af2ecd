use rand::seq::SliceRandom;

use super::{EncodedDataset, SplitDataset};
use crate::error::{Error, Result};
use crate::seed;

/// Fractions of each class assigned to train / validation / test.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl SplitFractions {
    pub fn new(train: f64, val: f64, test: f64) -> Result<Self> {
        let f = Self { train, val, test };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let parts = [self.train, self.val, self.test];
        if parts.iter().any(|p| !(p.is_finite() && *p >= 0.0)) || self.train <= 0.0 {
            return Err(Error::BadConfig(format!(
                "split fractions must be non-negative with a positive train share, got {parts:?}"
            )));
        }
        if (parts.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::BadConfig(format!(
                "split fractions must sum to 1, got {parts:?}"
            )));
        }
        Ok(())
    }
}

impl Default for SplitFractions {
    fn default() -> Self {
        Self {
            train: 0.8,
            val: 0.1,
            test: 0.1,
        }
    }
}

/// A class too small to be divided three ways; all its rows went to train.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SplitWarning {
    pub class_id: u32,
    pub n_rows: usize,
}

/// Stratified per-class split.
///
/// Each class's rows are shuffled with a generator derived from `seed` and
/// the class id, then cut: `floor(n * val)` rows to validation,
/// `floor(n * test)` to test, the rest to train.
pub fn split_dataset(
    ds: &EncodedDataset,
    fractions: SplitFractions,
    seed: u64,
) -> Result<(SplitDataset, Vec<SplitWarning>)> {
    fractions.validate()?;
    if ds.is_empty() {
        return Err(Error::EmptyData);
    }
    let three_way = fractions.val > 0.0 && fractions.test > 0.0;
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    let mut warnings = Vec::new();
    // Tiny slack so e.g. 10 * 0.1 is not floored to 0 by representation error.
    let cut = |n: usize, f: f64| ((n as f64) * f + 1e-9).floor() as usize;

    for (class, mut rows) in ds.rows_by_class() {
        let n = rows.len();
        if three_way && n < 3 {
            log::warn!("class {class} has only {n} rows; assigning all to train");
            warnings.push(SplitWarning {
                class_id: class,
                n_rows: n,
            });
            train.extend(rows);
            continue;
        }
        rows.shuffle(&mut seed::rng(seed, &[0x5917, u64::from(class)]));
        let n_val = cut(n, fractions.val);
        let n_test = cut(n, fractions.test);
        val.extend_from_slice(&rows[..n_val]);
        test.extend_from_slice(&rows[n_val..n_val + n_test]);
        train.extend_from_slice(&rows[n_val + n_test..]);
    }
    for part in [&mut train, &mut val, &mut test] {
        part.sort_unstable();
    }
    Ok((
        SplitDataset {
            train: ds.select_rows(&train),
            val: ds.select_rows(&val),
            test: ds.select_rows(&test),
            train_rows: train,
            val_rows: val,
            test_rows: test,
        },
        warnings,
    ))
}
