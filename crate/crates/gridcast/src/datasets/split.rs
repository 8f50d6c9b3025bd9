//! Chronological train/validation/test split.

use serde::{Deserialize, Serialize};

use super::{DemandDataset, SplitLabel};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitFractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for SplitFractions {
    fn default() -> Self {
        SplitFractions {
            train: 0.6,
            val: 0.2,
            test: 0.2,
        }
    }
}

impl SplitFractions {
    pub fn validate(&self) -> Result<()> {
        if self.train <= 0.0 || self.val <= 0.0 || self.test <= 0.0 {
            return Err(Error::Argument("split fractions must be positive".into()));
        }
        if ((self.train + self.val + self.test) - 1.0).abs() > 1e-9 {
            return Err(Error::Argument("split fractions must sum to 1".into()));
        }
        Ok(())
    }
}

/// Labels contiguous chronological blocks train -> validation -> test.
/// Boundaries are floors of the cumulative fractions.
pub fn chronological_split(ds: &mut DemandDataset, fractions: SplitFractions) -> Result<()> {
    fractions.validate()?;
    let n = ds.len();
    let n_train = (n as f64 * fractions.train).floor() as usize;
    let n_train_val = (n as f64 * (fractions.train + fractions.val)).floor() as usize;
    if n_train == 0 || n_train_val == n_train || n_train_val == n {
        return Err(Error::Argument(format!(
            "split of {n} instances leaves an empty part ({n_train}/{}/{})",
            n_train_val - n_train,
            n - n_train_val
        )));
    }
    ds.split = (0..n)
        .map(|i| {
            if i < n_train {
                SplitLabel::Train
            } else if i < n_train_val {
                SplitLabel::Val
            } else {
                SplitLabel::Test
            }
        })
        .collect();
    Ok(())
}
