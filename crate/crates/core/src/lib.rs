//! Expert-aware uncertainty estimation for binary classifiers.
//!
//! The crate combines two sources of uncertainty for each prediction:
//!
//! - disagreement between members of an ensemble (population standard deviation), which tracks
//!   what the model does not know;
//! - the distance of the mean expert vote (or a network trained to imitate it) from a certain
//!   answer, which tracks how hard the example itself is.
//!
//! Modules:
//!
//! - [`nn`]: small feed-forward classifier with exact gradients, SGD training, checkpointing.
//! - [`data`]: examples with expert votes, CSV ingest, splits, a synthetic generator.
//! - [`estimators`]: ensembles (classification, checkpoint snapshots, dropout passes,
//!   expert-aware) and every uncertainty score built from them.
//! - [`eval`]: rejection curves, area above the curve, discard metrics, reports and plots.
//!
//! Numeric code is generic over [`Real`] (floating point) or [`Scalar`] (any ordered field,
//! including exact rationals). Aliases for `f64` are exported at the crate root.

pub mod data;
pub mod error;
pub mod estimators;
pub mod eval;
pub mod nn;
pub mod scalar;
pub mod seed;

pub use error::{Error, Result};
pub use scalar::{Real, Scalar};

pub type Mlp64 = nn::Mlp<f64>;
pub type Mlp32 = nn::Mlp<f32>;
pub type Dataset64 = data::Dataset<f64>;
pub type Example64 = data::Example<f64>;
pub type Ensemble64 = estimators::Ensemble<f64>;
pub type UncertaintyScore64 = estimators::UncertaintyScore<f64>;
pub type ScoredPrediction64 = eval::ScoredPrediction<f64>;
pub type RejectionCurve64 = eval::RejectionCurve<f64>;
