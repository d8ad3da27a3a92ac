//! Two-Gaussian generator with known posterior and simulated expert annotators.

use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use super::example::{Dataset, Example, Vote};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed;

/// Half-width of the boundary band in logit units: band posteriors lie in
/// `[sigmoid(-3), sigmoid(3)]`, roughly `[0.047, 0.953]`.
const BAND_LOGIT: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticConfig {
    pub n_examples: usize,
    pub n_features: usize,
    /// Distance between the two class means.
    pub class_separation: f64,
    /// Share of examples placed uniformly in the boundary band instead of drawn from the blobs.
    pub aleatoric_band_fraction: f64,
    pub n_experts: usize,
    pub expert_noise_sd: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    /// 2000 examples in 64 dimensions, separation 5, 30% band, six experts at noise 0.15.
    fn default() -> Self {
        Self {
            n_examples: 2000,
            n_features: 64,
            class_separation: 5.0,
            aleatoric_band_fraction: 0.3,
            n_experts: 6,
            expert_noise_sd: 0.15,
            seed: 0,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_examples == 0 || self.n_features == 0 || self.n_experts == 0 {
            return Err(Error::config("n_examples, n_features and n_experts must be positive"));
        }
        if !(self.class_separation > 0.0 && self.class_separation.is_finite()) {
            return Err(Error::config("class_separation must be positive"));
        }
        if !(0.0..=1.0).contains(&self.aleatoric_band_fraction) {
            return Err(Error::config("aleatoric_band_fraction must lie in [0, 1]"));
        }
        if !(self.expert_noise_sd >= 0.0 && self.expert_noise_sd.is_finite()) {
            return Err(Error::config("expert_noise_sd must be nonnegative"));
        }
        Ok(())
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Draws a dataset from an equal-weight mixture of `N(±s/2 · u, I)` with `u` the normalized
/// all-ones direction.
///
/// The class-one posterior of such a mixture is `sigmoid(s · <x, u>)`; it is stored as
/// `true_positive_prob` and the label is drawn from it. Band examples replace the projection on
/// `u` with a uniform draw inside the boundary band. Every example then receives
/// `n_experts` simulated votes.
pub fn synthesize<T: Real>(config: &SyntheticConfig) -> Result<Dataset<T>> {
    config.validate()?;
    let d = config.n_features;
    let sep = config.class_separation;
    let u = 1.0 / (d as f64).sqrt();
    let band = BAND_LOGIT / sep;
    let mut rng = seed::rng(seed::derive(config.seed, "synthesize", 0));

    let mut examples = Vec::with_capacity(config.n_examples);
    for i in 0..config.n_examples {
        let in_band = rng.random::<f64>() < config.aleatoric_band_fraction;
        let projection = if in_band {
            rng.random_range(-band..=band)
        } else {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let noise: f64 = StandardNormal.sample(&mut rng);
            sign * sep / 2.0 + noise
        };
        let z: Vec<f64> = (0..d).map(|_| StandardNormal.sample(&mut rng)).collect();
        let z_along: f64 = z.iter().sum::<f64>() * u;
        let features: Vec<T> = z.iter().map(|&zi| T::lit(zi + (projection - z_along) * u)).collect();

        let p = logistic(sep * projection);
        let label = rng.random::<f64>() < p;
        let mut ex = Example {
            id: format!("s{i:06}"),
            features,
            label,
            expert_votes: None,
            true_positive_prob: Some(T::lit(p)),
        };
        ex.expert_votes = Some(simulate_experts(&ex, config.n_experts, config.expert_noise_sd, config.seed)?);
        examples.push(ex);
    }
    Dataset::new(examples)
}

/// Expert `k` reports the grid point nearest to `clamp(p + eps_k, 0, 1)` where
/// `eps_k ~ N(0, noise_sd)` is seeded by `(seed, example id, k)`.
pub fn simulate_experts<T: Real>(
    example: &Example<T>,
    n_experts: usize,
    noise_sd: f64,
    seed: u64,
) -> Result<Vec<Vote>> {
    let p = example
        .true_positive_prob
        .and_then(|p| p.to_f64())
        .ok_or_else(|| Error::input(format!("example `{}` has no true_positive_prob", example.id)))?;
    let noise = Normal::new(0.0, noise_sd)
        .map_err(|e| Error::input(format!("expert noise sd {noise_sd}: {e}")))?;
    let base = seed ^ seed::stable_hash(example.id.as_bytes());
    Ok((0..n_experts)
        .map(|k| {
            let eps = if noise_sd > 0.0 {
                noise.sample(&mut seed::rng(seed::derive(base, "expert", k as u64)))
            } else {
                0.0
            };
            Vote::nearest(p + eps)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_p(p: f64) -> Example<f64> {
        Example {
            id: "e".into(),
            features: vec![],
            label: false,
            expert_votes: None,
            true_positive_prob: Some(p),
        }
    }

    #[test]
    fn noiseless_experts_round_to_grid() {
        assert!(simulate_experts(&with_p(0.5), 6, 0.0, 1).unwrap().iter().all(|v| v.quarters() == 2));
        assert!(simulate_experts(&with_p(0.9), 6, 0.0, 1).unwrap().iter().all(|v| v.quarters() == 4));
        assert!(simulate_experts(&with_p(0.6), 6, 0.0, 1).unwrap().iter().all(|v| v.quarters() == 2));
    }

    #[test]
    fn noisy_expert_mean_tracks_probability() {
        let mut total = 0.0;
        let mut count = 0.0;
        for s in 0..1000 {
            for v in simulate_experts(&with_p(0.75), 6, 0.2, s).unwrap() {
                total += v.value::<f64>();
                count += 1.0;
            }
        }
        assert!((total / count - 0.75).abs() < 0.05, "{}", total / count);
    }

    #[test]
    fn missing_posterior() {
        let ex = Example { true_positive_prob: None, ..with_p(0.0) };
        assert!(matches!(simulate_experts(&ex, 3, 0.1, 0), Err(Error::Input(_))));
    }

    #[test]
    fn well_separated_blobs_are_certain() {
        let cfg = SyntheticConfig {
            n_examples: 500,
            class_separation: 50.0,
            aleatoric_band_fraction: 0.0,
            ..Default::default()
        };
        let ds = synthesize::<f64>(&cfg).unwrap();
        for ex in ds.examples() {
            let p = ex.true_positive_prob.unwrap();
            assert!(!(1e-6..=1.0 - 1e-6).contains(&p), "{p}");
        }
    }

    #[test]
    fn band_moves_mass_to_boundary() {
        let spread = |band: f64| {
            let cfg = SyntheticConfig { aleatoric_band_fraction: band, seed: 3, ..Default::default() };
            let ds = synthesize::<f64>(&cfg).unwrap();
            ds.examples().iter().map(|e| (e.true_positive_prob.unwrap() - 0.5).abs()).sum::<f64>()
                / ds.len() as f64
        };
        assert!(spread(1.0) < spread(0.0));
    }

    #[test]
    fn deterministic_and_valid() {
        let cfg = SyntheticConfig { n_examples: 100, seed: 11, ..Default::default() };
        let a = synthesize::<f64>(&cfg).unwrap();
        assert_eq!(a, synthesize::<f64>(&cfg).unwrap());
        assert!(a.has_votes());
        for ex in a.examples() {
            assert_eq!(ex.expert_votes.as_ref().unwrap().len(), 6);
            let m: f64 = ex.mean_vote().unwrap();
            assert!((0.0..=1.0).contains(&m));
        }
        assert_ne!(a, synthesize::<f64>(&SyntheticConfig { seed: 12, ..cfg }).unwrap());
    }

    #[test]
    fn invalid_config() {
        let cfg = SyntheticConfig { n_experts: 0, ..Default::default() };
        assert!(synthesize::<f64>(&cfg).is_err());
        let cfg = SyntheticConfig { aleatoric_band_fraction: 1.5, ..Default::default() };
        assert!(synthesize::<f64>(&cfg).is_err());
    }
}
