use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::example::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed;

/// Train/validation/test proportions plus the master seed that fixes the test pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    /// 10/10/80.
    fn default() -> Self {
        Self {
            train_fraction: 0.1,
            val_fraction: 0.1,
            test_fraction: 0.8,
            seed: 0,
        }
    }
}

/// Result of a split; each part keeps the shuffled order.
#[derive(Debug, Clone)]
pub struct Split<T> {
    pub train: Dataset<T>,
    pub val: Dataset<T>,
    pub test: Dataset<T>,
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        let f = [self.train_fraction, self.val_fraction, self.test_fraction];
        if f.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return Err(Error::input(format!("split fractions {f:?} must each lie in (0, 1)")));
        }
        if (f.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::input(format!("split fractions {f:?} must sum to 1")));
        }
        Ok(())
    }

    /// `(train, val, test)` sizes for `n` examples. Test takes the rounding remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let train = (self.train_fraction * n as f64).round() as usize;
        let val = (self.val_fraction * n as f64).round() as usize;
        (train, val, n.saturating_sub(train + val))
    }
}

/// Single-seed split: equivalent to [`split_run`] with `run_seed = spec.seed`.
pub fn split<T: Real>(dataset: &Dataset<T>, spec: &SplitSpec) -> Result<Split<T>> {
    split_run(dataset, spec, spec.seed)
}

/// Test examples are drawn by `spec.seed` alone; the remaining pool is divided into train and
/// validation by `run_seed`. Repeated runs with different `run_seed` therefore share one test
/// set.
pub fn split_run<T: Real>(dataset: &Dataset<T>, spec: &SplitSpec, run_seed: u64) -> Result<Split<T>> {
    spec.validate()?;
    let n = dataset.len();
    if n < 10 {
        return Err(Error::input(format!("need at least 10 examples to split, got {n}")));
    }
    let (n_train, n_val, n_test) = spec.sizes(n);
    if n_train == 0 || n_val == 0 || n_test == 0 {
        return Err(Error::input(format!(
            "split of {n} examples leaves an empty part ({n_train}/{n_val}/{n_test})"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut seed::rng(seed::derive(spec.seed, "test-pool", 0)));
    let (test_idx, pool) = order.split_at_mut(n_test);
    pool.shuffle(&mut seed::rng(seed::derive(run_seed, "train-val", 0)));
    let (train_idx, val_idx) = pool.split_at(n_train);

    Ok(Split {
        train: dataset.subset(train_idx),
        val: dataset.subset(val_idx),
        test: dataset.subset(test_idx),
    })
}
