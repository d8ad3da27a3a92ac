//! Ensembles and uncertainty scores.

mod ensemble;
mod method;
mod scores;

pub use ensemble::{
    build_ce, build_eae, build_mcmc_ensemble, mc_dropout_std, mcmc_from_checkpoints, CeBuild, CeConfig, Ensemble,
    EnsembleKind,
};
pub use method::{estimate, estimate_all, Combination, DropoutSettings, EstimateContext, Method};
pub use scores::{
    expert_mp, expert_mp_from_values, max_prob_complexity, mean, model_mp, population_std, EstimatorTag,
    UncertaintyScore,
};

use crate::error::Result;
use crate::scalar::Real;

/// `p̄(x)` of `ensemble`.
pub fn ensemble_mean<T: Real>(ensemble: &Ensemble<T>, x: &[T]) -> Result<T> {
    ensemble.mean(x)
}

/// Population standard deviation of `ensemble` at `example`, tagged by ensemble kind.
pub fn std_uncertainty<T: Real>(
    ensemble: &Ensemble<T>,
    example: &crate::data::Example<T>,
) -> Result<UncertaintyScore<T>> {
    Ok(UncertaintyScore {
        value: ensemble.std(&example.features)?,
        estimator: ensemble.std_tag(),
        example_id: example.id.clone(),
    })
}

/// MC dropout score: spread of `n_passes` stochastic passes of `model`.
pub fn mc_dropout_uncertainty<T: Real>(
    model: &crate::nn::Mlp<T>,
    example: &crate::data::Example<T>,
    settings: DropoutSettings,
) -> Result<UncertaintyScore<T>> {
    Ok(UncertaintyScore {
        value: mc_dropout_std(model, &example.features, settings.n_passes, T::lit(settings.rate), settings.seed)?,
        estimator: EstimatorTag::McDropoutStd,
        example_id: example.id.clone(),
    })
}
