use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Sample;
use crate::scalar::{Real, Scalar};
use crate::seed;

/// One expert answer on the five-point scale `0.00, 0.25, 0.50, 0.75, 1.00`.
///
/// Stored as the number of quarters so that arithmetic on votes is exact in any [`Scalar`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Vote(u8);

impl Vote {
    pub const GRID: [Vote; 5] = [Vote(0), Vote(1), Vote(2), Vote(3), Vote(4)];
    const GRID_TOLERANCE: f64 = 1e-9;

    pub fn from_quarters(q: u8) -> Option<Self> {
        (q <= 4).then_some(Self(q))
    }

    /// Exact grid membership (up to parse noise of `1e-9`).
    pub fn from_value(v: f64) -> Option<Self> {
        let q = (v * 4.0).round();
        if (0.0..=4.0).contains(&q) && (v - q / 4.0).abs() <= Self::GRID_TOLERANCE {
            Some(Self(q as u8))
        } else {
            None
        }
    }

    /// Closest grid point to `v` after clamping to `[0, 1]`. Exact midpoints go to the larger
    /// grid value.
    pub fn nearest(v: f64) -> Self {
        let q = (v.clamp(0.0, 1.0) * 4.0 + 0.5).floor();
        Self(q.min(4.0) as u8)
    }

    pub fn quarters(self) -> u8 {
        self.0
    }

    pub fn value<T: Scalar>(self) -> T {
        T::from_count(self.0 as usize) / T::from_count(4)
    }
}

impl fmt::Display for Vote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{:02}", self.0 / 4, (self.0 % 4) * 25)
    }
}

/// Mean of a vote list, `ē`. `None` when the list is empty.
pub fn mean_vote<T: Scalar>(votes: &[Vote]) -> Option<T> {
    if votes.is_empty() {
        return None;
    }
    let quarters: usize = votes.iter().map(|v| v.0 as usize).sum();
    Some(T::from_count(quarters) / T::from_count(4 * votes.len()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Example<T> {
    pub id: String,
    pub features: Vec<T>,
    pub label: bool,
    pub expert_votes: Option<Vec<Vote>>,
    /// Generating posterior `P(label = 1 | features)`; only known for synthetic data and never
    /// used for training.
    pub true_positive_prob: Option<T>,
}

impl<T: Scalar> Example<T> {
    pub fn label_value(&self) -> T {
        if self.label {
            T::one()
        } else {
            T::zero()
        }
    }

    pub fn mean_vote(&self) -> Option<T> {
        self.expert_votes.as_deref().and_then(mean_vote)
    }
}

/// Ordered collection of examples sharing one feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    examples: Vec<Example<T>>,
}

impl<T: Real> Dataset<T> {
    pub fn new(examples: Vec<Example<T>>) -> Result<Self> {
        if let Some(first) = examples.first() {
            let d = first.features.len();
            for (i, ex) in examples.iter().enumerate() {
                if ex.features.len() != d {
                    return Err(Error::input(format!(
                        "example {i} (`{}`) has {} features, expected {d}",
                        ex.id,
                        ex.features.len()
                    )));
                }
                if !ex.features.iter().all(|v| v.is_finite()) {
                    return Err(Error::input(format!("example `{}` has non-finite features", ex.id)));
                }
            }
        }
        Ok(Self { examples })
    }

    pub fn examples(&self) -> &[Example<T>] {
        &self.examples
    }

    pub fn into_examples(self) -> Vec<Example<T>> {
        self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.examples.first().map_or(0, |e| e.features.len())
    }

    /// True when every example carries at least one vote.
    pub fn has_votes(&self) -> bool {
        !self.is_empty()
            && self
                .examples
                .iter()
                .all(|e| e.expert_votes.as_ref().is_some_and(|v| !v.is_empty()))
    }

    pub fn has_oracle(&self) -> bool {
        !self.is_empty() && self.examples.iter().all(|e| e.true_positive_prob.is_some())
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            examples: indices.iter().map(|&i| self.examples[i].clone()).collect(),
        }
    }

    /// Training pairs against the ground-truth label.
    pub fn label_samples(&self) -> Vec<Sample<'_, T>> {
        self.examples
            .iter()
            .map(|e| Sample::new(&e.features, e.label_value()))
            .collect()
    }

    /// Training pairs against the mean expert vote.
    pub fn expert_samples(&self) -> Result<Vec<Sample<'_, T>>> {
        self.examples
            .iter()
            .map(|e| {
                e.mean_vote()
                    .map(|t| Sample::new(&e.features[..], t))
                    .ok_or_else(|| Error::input(format!("example `{}` has no expert votes", e.id)))
            })
            .collect()
    }

    /// Order-independent hash of the example ids.
    pub fn id_fingerprint(&self) -> u64 {
        let mut ids: Vec<&str> = self.examples.iter().map(|e| e.id.as_str()).collect();
        ids.sort_unstable();
        seed::stable_hash(ids.join("\n").as_bytes())
    }
}

/// Provenance record written next to every generated or split dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub format_version: u32,
    pub provenance: String,
    pub n_examples: usize,
    pub n_features: usize,
    pub n_experts: usize,
    pub columns: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<super::SyntheticConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<super::SplitSpec>,
}

impl DatasetManifest {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }
}
