use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ensemble::{mc_dropout_std, Ensemble};
use super::scores::{expert_mp, mean, model_mp, EstimatorTag, UncertaintyScore};
use crate::data::Example;
use crate::error::{Error, Result};
use crate::nn::{DropoutMode, Mlp};
use crate::scalar::Real;
use crate::seed;

/// The uncertainty estimation methods compared in the evaluation table, plus the synthetic
/// ground-truth reference.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Method {
    CeStd,
    Mcmc,
    McDropout,
    EaeMp,
    EanMpPlusCeStd,
    EaeMpPlusCeStd,
    EaeMpPlusEaeStd,
    ExpMp,
    ExpMpPlusCeStd,
    /// MP of the generating posterior; synthetic data only.
    OracleMp,
}

impl Method {
    /// The nine table rows, in table order.
    pub const TABLE: [Method; 9] = [
        Method::CeStd,
        Method::Mcmc,
        Method::McDropout,
        Method::EaeMp,
        Method::EanMpPlusCeStd,
        Method::EaeMpPlusCeStd,
        Method::EaeMpPlusEaeStd,
        Method::ExpMp,
        Method::ExpMpPlusCeStd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::CeStd => "CE_STD",
            Method::Mcmc => "MCMC",
            Method::McDropout => "MC_DROPOUT",
            Method::EaeMp => "EAE_MP",
            Method::EanMpPlusCeStd => "EAN_MP+CE_STD",
            Method::EaeMpPlusCeStd => "EAE_MP+CE_STD",
            Method::EaeMpPlusEaeStd => "EAE_MP+EAE_STD",
            Method::ExpMp => "EXP_MP",
            Method::ExpMpPlusCeStd => "EXP_MP+CE_STD",
            Method::OracleMp => "ORACLE_MP",
        }
    }

    /// Needs expert votes for the examples being scored.
    pub fn needs_votes_at_inference(self) -> bool {
        matches!(self, Method::ExpMp | Method::ExpMpPlusCeStd)
    }

    /// Needs expert votes on the training data (fine-tuning).
    pub fn needs_finetuning(self) -> bool {
        matches!(
            self,
            Method::EaeMp | Method::EanMpPlusCeStd | Method::EaeMpPlusCeStd | Method::EaeMpPlusEaeStd
        )
    }

    /// Needs the full fine-tuned ensemble rather than the single designated network.
    pub fn needs_eae(self) -> bool {
        matches!(self, Method::EaeMp | Method::EaeMpPlusCeStd | Method::EaeMpPlusEaeStd)
    }

    pub fn needs_mcmc(self) -> bool {
        self == Method::Mcmc
    }

    pub fn needs_oracle(self) -> bool {
        self == Method::OracleMp
    }

    pub fn tag(self) -> EstimatorTag {
        use EstimatorTag as T;
        match self {
            Method::CeStd => T::StdCe,
            Method::Mcmc => T::McmcStd,
            Method::McDropout => T::McDropoutStd,
            Method::EaeMp => T::MpEae,
            Method::EanMpPlusCeStd => T::sum(T::MpEan, T::StdCe),
            Method::EaeMpPlusCeStd => T::sum(T::MpEae, T::StdCe),
            Method::EaeMpPlusEaeStd => T::sum(T::MpEae, T::StdEae),
            Method::ExpMp => T::MpExp,
            Method::ExpMpPlusCeStd => T::sum(T::MpExp, T::StdCe),
            Method::OracleMp => T::MpOracle,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s.chars().filter(|c| !c.is_whitespace()).collect::<String>().to_ascii_uppercase();
        Method::TABLE
            .iter()
            .chain(&[Method::OracleMp])
            .copied()
            .find(|m| m.name() == norm)
            .ok_or_else(|| Error::input(format!("unknown method `{s}`")))
    }
}

impl TryFrom<String> for Method {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Method> for String {
    fn from(m: Method) -> String {
        m.name().to_string()
    }
}

/// How the two terms of a combined method are added.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Combination {
    /// Plain sum of the raw scores.
    #[default]
    Raw,
    /// Each term divided by its maximum over the scored set before adding. Ablation only.
    MaxNormalized,
}

/// MC dropout settings: passes per member and the inference dropout rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DropoutSettings {
    pub n_passes: usize,
    pub rate: f64,
    pub seed: u64,
}

impl Default for DropoutSettings {
    /// 50 passes at rate 0.2.
    fn default() -> Self {
        Self { n_passes: 50, rate: 0.2, seed: 0 }
    }
}

/// Everything an estimator may draw on. Unused parts can be left empty.
#[derive(Debug, Clone, Copy)]
pub struct EstimateContext<'a, T> {
    pub ce: Option<&'a Ensemble<T>>,
    pub eae: Option<&'a Ensemble<T>>,
    /// The single designated expert-aware network; defaults to the first EAE member.
    pub ean: Option<&'a Mlp<T>>,
    /// One snapshot ensemble per classification member (or just one).
    pub mcmc: &'a [Ensemble<T>],
    pub dropout: DropoutSettings,
}

impl<'a, T> Default for EstimateContext<'a, T> {
    fn default() -> Self {
        Self { ce: None, eae: None, ean: None, mcmc: &[], dropout: DropoutSettings::default() }
    }
}

impl<'a, T: Real> EstimateContext<'a, T> {
    fn ce(&self, method: Method) -> Result<&'a Ensemble<T>> {
        self.ce.ok_or_else(|| Error::input(format!("{method} needs a classification ensemble")))
    }

    fn eae(&self, method: Method) -> Result<&'a Ensemble<T>> {
        self.eae.ok_or_else(|| Error::input(format!("{method} needs an expert-aware ensemble")))
    }

    fn ean(&self, method: Method) -> Result<&'a Mlp<T>> {
        self.ean
            .or_else(|| self.eae.map(|e| &e.members()[0]))
            .ok_or_else(|| Error::input(format!("{method} needs an expert-aware network")))
    }

    /// Prediction used for the rejection curve: the classification ensemble's mean.
    pub fn predict(&self, x: &[T]) -> Result<T> {
        self.ce
            .ok_or_else(|| Error::input("predictions need a classification ensemble"))?
            .mean(x)
    }
}

/// One term of a score, before combination.
fn component<T: Real>(
    tag: &EstimatorTag,
    method: Method,
    ctx: &EstimateContext<'_, T>,
    example: &Example<T>,
) -> Result<T> {
    let x = &example.features;
    match tag {
        EstimatorTag::StdCe => ctx.ce(method)?.std(x),
        EstimatorTag::StdEae => ctx.eae(method)?.std(x),
        EstimatorTag::MpEae => model_mp(ctx.eae(method)?.mean(x)?),
        EstimatorTag::MpEan => model_mp(ctx.ean(method)?.forward(x, DropoutMode::Deterministic)?),
        EstimatorTag::MpExp => match example.expert_votes.as_deref() {
            Some(v) if !v.is_empty() => expert_mp(v),
            _ => Err(Error::MissingAnnotation {
                method: method.to_string(),
                example_id: example.id.clone(),
            }),
        },
        EstimatorTag::MpOracle => match example.true_positive_prob {
            Some(p) => model_mp(p),
            None => Err(Error::MissingAnnotation {
                method: method.to_string(),
                example_id: example.id.clone(),
            }),
        },
        EstimatorTag::McmcStd => {
            if ctx.mcmc.is_empty() {
                return Err(Error::input(format!("{method} needs snapshot ensembles")));
            }
            let per_run = ctx.mcmc.iter().map(|e| e.std(x)).collect::<Result<Vec<_>>>()?;
            mean(&per_run)
        }
        EstimatorTag::McDropoutStd => {
            let d = ctx.dropout;
            let rate = T::lit(d.rate);
            let per_member = ctx
                .ce(method)?
                .members()
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    let m = m.clone().with_dropout_rate(rate)?;
                    mc_dropout_std(&m, x, d.n_passes, rate, seed::derive(d.seed, "mc-dropout", i as u64))
                })
                .collect::<Result<Vec<_>>>()?;
            mean(&per_member)
        }
        EstimatorTag::Sum(a, b) => {
            Ok(component(a, method, ctx, example)? + component(b, method, ctx, example)?)
        }
    }
}

/// Score of `example` under `method`. Combined methods add their two terms unscaled.
pub fn estimate<T: Real>(
    method: Method,
    ctx: &EstimateContext<'_, T>,
    example: &Example<T>,
) -> Result<UncertaintyScore<T>> {
    let tag = method.tag();
    let value = component(&tag, method, ctx, example)?;
    Ok(UncertaintyScore { value, estimator: tag, example_id: example.id.clone() })
}

/// Scores a whole set. With [`Combination::MaxNormalized`], each term of a combined method is
/// scaled by its maximum over `examples` before adding.
pub fn estimate_all<T: Real>(
    method: Method,
    ctx: &EstimateContext<'_, T>,
    examples: &[Example<T>],
    combination: Combination,
) -> Result<Vec<UncertaintyScore<T>>> {
    let tag = method.tag();
    let values: Vec<T> = match (&tag, combination) {
        (EstimatorTag::Sum(a, b), Combination::MaxNormalized) => {
            let term = |t: &EstimatorTag| -> Result<Vec<T>> {
                let v = examples
                    .iter()
                    .map(|e| component(t, method, ctx, e))
                    .collect::<Result<Vec<T>>>()?;
                let max = v.iter().copied().fold(T::zero(), T::max);
                Ok(if max > T::zero() { v.into_iter().map(|s| s / max).collect() } else { v })
            };
            term(a)?.into_iter().zip(term(b)?).map(|(x, y)| x + y).collect()
        }
        _ => examples
            .iter()
            .map(|e| component(&tag, method, ctx, e))
            .collect::<Result<_>>()?,
    };
    Ok(values
        .into_iter()
        .zip(examples)
        .map(|(value, e)| UncertaintyScore { value, estimator: tag.clone(), example_id: e.id.clone() })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Vote;
    use crate::estimators::EnsembleKind;

    fn constant(p: f64) -> Mlp<f64> {
        let logit = (p / (1.0 - p)).ln();
        Mlp::from_parts(vec![1, 1], vec![vec![0.0]], vec![vec![logit]], 0.0).unwrap()
    }

    fn ens(ps: &[f64], kind: EnsembleKind) -> Ensemble<f64> {
        Ensemble::new(ps.iter().map(|&p| constant(p)).collect(), kind, vec![0; ps.len()]).unwrap()
    }

    fn example(votes: Option<Vec<u8>>) -> Example<f64> {
        Example {
            id: "q".into(),
            features: vec![0.0],
            label: true,
            expert_votes: votes.map(|v| v.into_iter().map(|q| Vote::from_quarters(q).unwrap()).collect()),
            true_positive_prob: Some(0.5),
        }
    }

    #[test]
    fn names_roundtrip() {
        for m in Method::TABLE.iter().chain(&[Method::OracleMp]) {
            assert_eq!(m.name().parse::<Method>().unwrap(), *m);
        }
        assert_eq!("exp_mp + ce_std".parse::<Method>().unwrap(), Method::ExpMpPlusCeStd);
        assert!("CE".parse::<Method>().is_err());
    }

    #[test]
    fn combined_scores_add() {
        let ce = ens(&[1e-13, 1.0 - 1e-13], EnsembleKind::Classification);
        let ctx = EstimateContext { ce: Some(&ce), ..Default::default() };
        let s = estimate(Method::ExpMpPlusCeStd, &ctx, &example(Some(vec![2; 6]))).unwrap();
        assert!((s.value - 1.0).abs() < 1e-12);
        assert_eq!(s.estimator.to_string(), "SUM(MP_EXP,STD_CE)");

        let flat = ens(&[0.3, 0.3], EnsembleKind::Classification);
        let ctx = EstimateContext { ce: Some(&flat), ..Default::default() };
        let ex = example(Some(vec![3, 4]));
        let sum = estimate(Method::ExpMpPlusCeStd, &ctx, &ex).unwrap().value;
        assert_eq!(sum, estimate(Method::ExpMp, &ctx, &ex).unwrap().value);
    }

    #[test]
    fn eae_mp_of_mean() {
        let eae = ens(&[0.5; 4], EnsembleKind::ExpertAware);
        let ctx = EstimateContext { eae: Some(&eae), ..Default::default() };
        assert!((estimate(Method::EaeMp, &ctx, &example(None)).unwrap().value - 0.5).abs() < 1e-15);
        // mean 0.5 of {0.1, 0.9}: MP of the mean, not the mean of MPs (which is 0.1)
        let spread = ens(&[0.1, 0.9], EnsembleKind::ExpertAware);
        let ctx = EstimateContext { eae: Some(&spread), ..Default::default() };
        assert!((estimate(Method::EaeMp, &ctx, &example(None)).unwrap().value - 0.5).abs() < 1e-12);
        let ean = estimate(Method::EanMpPlusCeStd, &EstimateContext { ce: Some(&spread), ..ctx }, &example(None));
        assert!((ean.unwrap().value - (0.1 + 0.4)).abs() < 1e-12);
    }

    #[test]
    fn missing_votes_is_an_annotation_error() {
        let ce = ens(&[0.2, 0.4], EnsembleKind::Classification);
        let ctx = EstimateContext { ce: Some(&ce), ..Default::default() };
        match estimate(Method::ExpMp, &ctx, &example(None)) {
            Err(Error::MissingAnnotation { method, example_id }) => {
                assert_eq!(method, "EXP_MP");
                assert_eq!(example_id, "q");
            }
            other => panic!("{other:?}"),
        }
        assert!(estimate(Method::EaeMp, &ctx, &example(None)).is_err());
    }

    #[test]
    fn normalized_sum_rescales_terms() {
        let ce = ens(&[0.2, 0.4], EnsembleKind::Classification);
        let ctx = EstimateContext { ce: Some(&ce), ..Default::default() };
        let exs = [example(Some(vec![2, 2])), Example { id: "r".into(), ..example(Some(vec![4, 4])) }];
        let raw = estimate_all(Method::ExpMpPlusCeStd, &ctx, &exs, Combination::Raw).unwrap();
        assert!((raw[0].value - 0.6).abs() < 1e-12);
        let norm = estimate_all(Method::ExpMpPlusCeStd, &ctx, &exs, Combination::MaxNormalized).unwrap();
        assert!((norm[0].value - 2.0).abs() < 1e-12);
        assert!((norm[1].value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dropout_and_snapshot_rows() {
        let ce = Ensemble::new(
            vec![Mlp::new(&[1, 6, 1], 0.2, 1).unwrap(), Mlp::new(&[1, 6, 1], 0.2, 2).unwrap()],
            EnsembleKind::Classification,
            vec![1, 2],
        )
        .unwrap();
        let snaps = [ens(&[0.2, 0.4], EnsembleKind::McmcSnapshots { epochs: vec![1, 2] })];
        let ctx = EstimateContext { ce: Some(&ce), mcmc: &snaps, ..Default::default() };
        let ex = Example { features: vec![2.0], ..example(None) };
        let d = estimate(Method::McDropout, &ctx, &ex).unwrap().value;
        assert!(d > 0.0 && d <= 0.5);
        assert_eq!(d, estimate(Method::McDropout, &ctx, &ex).unwrap().value);
        assert!((estimate(Method::Mcmc, &ctx, &ex).unwrap().value - 0.1).abs() < 1e-12);
    }
}
