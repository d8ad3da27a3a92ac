use std::fmt;

use serde::{Deserialize, Serialize};

use crate::data::{mean_vote, Vote};
use crate::error::{Error, Result};
use crate::scalar::{Real, Scalar};

/// Which estimator produced a score.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorTag {
    StdCe,
    StdEae,
    MpExp,
    MpEan,
    MpEae,
    MpOracle,
    McmcStd,
    McDropoutStd,
    Sum(Box<EstimatorTag>, Box<EstimatorTag>),
}

impl EstimatorTag {
    pub fn sum(a: EstimatorTag, b: EstimatorTag) -> Self {
        EstimatorTag::Sum(Box::new(a), Box::new(b))
    }
}

impl fmt::Display for EstimatorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            EstimatorTag::StdCe => "STD_CE",
            EstimatorTag::StdEae => "STD_EAE",
            EstimatorTag::MpExp => "MP_EXP",
            EstimatorTag::MpEan => "MP_EAN",
            EstimatorTag::MpEae => "MP_EAE",
            EstimatorTag::MpOracle => "MP_ORACLE",
            EstimatorTag::McmcStd => "MCMC_STD",
            EstimatorTag::McDropoutStd => "MCDROPOUT_STD",
            EstimatorTag::Sum(a, b) => return write!(f, "SUM({a},{b})"),
        };
        f.write_str(name)
    }
}

/// Uncertainty of one example under one estimator. Larger means less trustworthy.
#[derive(Debug, Clone, PartialEq)]
pub struct UncertaintyScore<T> {
    pub value: T,
    pub estimator: EstimatorTag,
    pub example_id: String,
}

/// Arithmetic mean. Fails on an empty slice.
///
/// Accumulates offsets from the first value, so a set of identical values averages to exactly
/// that value.
pub fn mean<T: Scalar>(values: &[T]) -> Result<T> {
    let (&first, _) = values
        .split_first()
        .ok_or_else(|| Error::input("mean of an empty set"))?;
    let offset = values.iter().fold(T::zero(), |acc, &v| acc + (v - first));
    Ok(first + offset / T::from_count(values.len()))
}

/// Population standard deviation `sqrt(1/k * sum (p_i - mean)^2)`; needs `k >= 2`.
pub fn population_std<T: Real>(values: &[T]) -> Result<T> {
    if values.len() < 2 {
        return Err(Error::input(format!(
            "standard deviation needs at least 2 members, got {}",
            values.len()
        )));
    }
    let m = mean(values)?;
    let var = values.iter().map(|&v| (v - m) * (v - m)).sum::<T>() / T::from_count(values.len());
    Ok(var.sqrt())
}

/// `1 - max(p, 1 - p)`: distance of a probability from the nearest certain answer.
pub fn max_prob_complexity<T: Scalar>(p: T) -> T {
    let one = T::one();
    one - T::max_of(p, one - p)
}

/// [`max_prob_complexity`] of a model output, checked to lie in `[0, 1]`.
pub fn model_mp<T: Scalar>(p: T) -> Result<T> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::input(format!("probability {p:?} outside [0, 1]")));
    }
    Ok(max_prob_complexity(p))
}

/// [`max_prob_complexity`] of the mean expert vote.
pub fn expert_mp<T: Scalar>(votes: &[Vote]) -> Result<T> {
    mean_vote(votes)
        .map(max_prob_complexity)
        .ok_or_else(|| Error::input("expert MP needs at least one vote"))
}

/// Like [`expert_mp`] for raw numeric votes, validating each against the grid.
pub fn expert_mp_from_values<T: Scalar>(values: &[f64]) -> Result<T> {
    let votes = values
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            Vote::from_value(v).ok_or_else(|| Error::Validation {
                row: k + 1,
                message: format!("vote {v} is not on the grid 0.00/0.25/0.50/0.75/1.00"),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    expert_mp(&votes)
}
