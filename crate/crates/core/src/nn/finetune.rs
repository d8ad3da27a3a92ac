use super::model::Mlp;
use super::train::{train, TrainConfig};
use crate::data::Dataset;
use crate::error::Result;
use crate::scalar::Real;

/// Continues training `model` towards each example's mean expert vote.
///
/// Uses the loss named in `config` (cross-entropy with soft targets by default) and returns a
/// new model; `model` itself is not modified. Fails if any example lacks votes.
pub fn finetune_to_experts<T: Real>(
    model: &Mlp<T>,
    dataset: &Dataset<T>,
    config: &TrainConfig,
) -> Result<Mlp<T>> {
    let samples = dataset.expert_samples()?;
    let config = TrainConfig {
        checkpoint_interval_epochs: None,
        ..config.clone()
    };
    train(model, &samples, &config).map(|(m, _)| m)
}
