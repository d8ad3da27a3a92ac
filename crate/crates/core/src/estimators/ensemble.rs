use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scores::{mean, population_std, EstimatorTag};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::nn::{finetune_to_experts, train, Checkpoint, DropoutMode, Mlp, TrainConfig};
use crate::scalar::Real;
use crate::seed;

/// How an ensemble was produced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EnsembleKind {
    /// Independently initialized classifiers trained on ground-truth labels.
    Classification,
    /// Periodic checkpoints of one training run, oldest first.
    McmcSnapshots { epochs: Vec<usize> },
    /// One base model evaluated under `n_passes` fixed dropout masks.
    DropoutPasses { n_passes: usize, seed: u64 },
    /// Classification members fine-tuned towards mean expert votes.
    ExpertAware,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble<T> {
    members: Vec<Mlp<T>>,
    kind: EnsembleKind,
    member_seeds: Vec<u64>,
}

impl<T: Real> Ensemble<T> {
    pub fn new(members: Vec<Mlp<T>>, kind: EnsembleKind, member_seeds: Vec<u64>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::input("ensemble has no members"));
        }
        if member_seeds.len() != members.len() {
            return Err(Error::input("one seed per ensemble member is required"));
        }
        match &kind {
            EnsembleKind::DropoutPasses { .. } if members.len() != 1 => {
                return Err(Error::input("dropout ensembles wrap exactly one base model"))
            }
            EnsembleKind::McmcSnapshots { epochs } if epochs.len() != members.len() => {
                return Err(Error::input("one epoch per snapshot member is required"))
            }
            _ => {}
        }
        Ok(Self { members, kind, member_seeds })
    }

    /// Monte Carlo dropout view of `base`: pass `j` applies the mask seeded by
    /// `(seed, j)`, identical for every input.
    pub fn dropout(base: Mlp<T>, n_passes: usize, seed: u64) -> Result<Self> {
        Self::new(vec![base], EnsembleKind::DropoutPasses { n_passes, seed }, vec![seed])
    }

    pub fn members(&self) -> &[Mlp<T>] {
        &self.members
    }

    pub fn kind(&self) -> &EnsembleKind {
        &self.kind
    }

    pub fn member_seeds(&self) -> &[u64] {
        &self.member_seeds
    }

    /// Number of outputs contributing to the mean and spread.
    pub fn effective_size(&self) -> usize {
        match self.kind {
            EnsembleKind::DropoutPasses { n_passes, .. } => n_passes,
            _ => self.members.len(),
        }
    }

    pub fn std_tag(&self) -> EstimatorTag {
        match self.kind {
            EnsembleKind::Classification => EstimatorTag::StdCe,
            EnsembleKind::McmcSnapshots { .. } => EstimatorTag::McmcStd,
            EnsembleKind::DropoutPasses { .. } => EstimatorTag::McDropoutStd,
            EnsembleKind::ExpertAware => EstimatorTag::StdEae,
        }
    }

    /// One probability per effective member.
    pub fn outputs(&self, x: &[T]) -> Result<Vec<T>> {
        match self.kind {
            EnsembleKind::DropoutPasses { n_passes, seed } => {
                let base = &self.members[0];
                (0..n_passes)
                    .map(|j| base.forward(x, DropoutMode::Active(seed::derive(seed, "dropout-pass", j as u64))))
                    .collect()
            }
            _ => self
                .members
                .iter()
                .map(|m| m.forward(x, DropoutMode::Deterministic))
                .collect(),
        }
    }

    /// Mean member probability, `p̄(x)`.
    pub fn mean(&self, x: &[T]) -> Result<T> {
        mean(&self.outputs(x)?)
    }

    /// Population standard deviation of member probabilities.
    pub fn std(&self, x: &[T]) -> Result<T> {
        population_std(&self.outputs(x)?)
    }

    pub fn save_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let files: Vec<String> = (0..self.members.len()).map(|i| format!("member_{i:03}.mlp")).collect();
        for (m, f) in self.members.iter().zip(&files) {
            m.save(dir.join(f))?;
        }
        let manifest = EnsembleManifest {
            format_version: 1,
            kind: self.kind.clone(),
            member_seeds: self.member_seeds.clone(),
            members: files,
        };
        let path = dir.join(MANIFEST);
        std::fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load_dir(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let path = dir.join(MANIFEST);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: EnsembleManifest = serde_json::from_str(&text)?;
        let members = manifest
            .members
            .iter()
            .map(|f| Mlp::load(dir.join(f)))
            .collect::<Result<Vec<_>>>()?;
        Self::new(members, manifest.kind, manifest.member_seeds)
    }
}

const MANIFEST: &str = "ensemble.json";

#[derive(Debug, Serialize, Deserialize)]
struct EnsembleManifest {
    format_version: u32,
    #[serde(flatten)]
    kind: EnsembleKind,
    member_seeds: Vec<u64>,
    members: Vec<String>,
}

/// Settings for a classification ensemble.
#[derive(Debug, Clone, PartialEq)]
pub struct CeConfig {
    pub k: usize,
    pub hidden: Vec<usize>,
    pub dropout_rate: f64,
    /// Base training settings; each member gets its own derived seed.
    pub train: TrainConfig,
    pub master_seed: u64,
}

impl Default for CeConfig {
    fn default() -> Self {
        Self {
            k: 20,
            hidden: crate::nn::DEFAULT_HIDDEN.to_vec(),
            dropout_rate: 0.2,
            train: TrainConfig::classification(),
            master_seed: 0,
        }
    }
}

/// A trained classification ensemble plus each member's checkpoints.
#[derive(Debug, Clone)]
pub struct CeBuild<T> {
    pub ensemble: Ensemble<T>,
    pub checkpoints: Vec<Vec<Checkpoint<T>>>,
}

/// `train_sets` holds one training set per member, or a single set shared by all.
fn member_set<T>(sets: &[Dataset<T>], i: usize) -> &Dataset<T> {
    if sets.len() == 1 {
        &sets[0]
    } else {
        &sets[i]
    }
}

fn check_sets<T: Real>(sets: &[Dataset<T>], k: usize) -> Result<()> {
    if sets.len() != 1 && sets.len() != k {
        return Err(Error::input(format!("expected 1 or {k} training sets, got {}", sets.len())));
    }
    if sets.iter().any(|s| s.is_empty()) {
        return Err(Error::input("empty training set"));
    }
    Ok(())
}

/// Trains `config.k` classifiers. Member `i` is initialized and shuffled from substreams
/// `i` of the master seed and trained on its own training set. Members train in parallel;
/// the result does not depend on scheduling.
pub fn build_ce<T: Real>(train_sets: &[Dataset<T>], config: &CeConfig) -> Result<CeBuild<T>> {
    if config.k < 2 {
        return Err(Error::config(format!("classification ensemble needs k >= 2, got {}", config.k)));
    }
    check_sets(train_sets, config.k)?;
    let input_dim = train_sets[0].n_features();
    let sizes = crate::nn::layer_sizes(input_dim, &config.hidden);
    let rate = T::lit(config.dropout_rate);

    let trained: Vec<(u64, Mlp<T>, Vec<Checkpoint<T>>)> = (0..config.k)
        .into_par_iter()
        .map(|i| {
            let init_seed = seed::derive(config.master_seed, "ce-init", i as u64);
            let cfg = config
                .train
                .clone()
                .with_seed(seed::derive(config.master_seed, "ce-train", i as u64));
            let samples = member_set(train_sets, i).label_samples();
            Mlp::new(&sizes, rate, init_seed)
                .and_then(|m| train(&m, &samples, &cfg))
                .map(|(m, cps)| (init_seed, m, cps))
                .map_err(|e| Error::Member { member: i, source: Box::new(e) })
        })
        .collect::<Result<_>>()?;

    let mut seeds = Vec::with_capacity(config.k);
    let mut members = Vec::with_capacity(config.k);
    let mut checkpoints = Vec::with_capacity(config.k);
    for (s, m, c) in trained {
        seeds.push(s);
        members.push(m);
        checkpoints.push(c);
    }
    Ok(CeBuild {
        ensemble: Ensemble::new(members, EnsembleKind::Classification, seeds)?,
        checkpoints,
    })
}

/// The last `keep` checkpoints of one run, oldest first.
pub fn mcmc_from_checkpoints<T: Real>(checkpoints: &[Checkpoint<T>], keep: usize) -> Result<Ensemble<T>> {
    if keep < 2 {
        return Err(Error::config(format!("snapshot ensemble needs keep >= 2, got {keep}")));
    }
    if checkpoints.len() < keep {
        return Err(Error::config(format!(
            "run produced {} checkpoints, {keep} required",
            checkpoints.len()
        )));
    }
    let tail = &checkpoints[checkpoints.len() - keep..];
    Ensemble::new(
        tail.iter().map(|c| c.model.clone()).collect(),
        EnsembleKind::McmcSnapshots { epochs: tail.iter().map(|c| c.epoch).collect() },
        tail.iter().map(|c| c.epoch as u64).collect(),
    )
}

/// Trains `model` with checkpoints every `interval` epochs and keeps the last `keep`.
pub fn build_mcmc_ensemble<T: Real>(
    model: &Mlp<T>,
    dataset: &Dataset<T>,
    config: &TrainConfig,
    interval: usize,
    keep: usize,
) -> Result<Ensemble<T>> {
    if keep < 2 {
        return Err(Error::config(format!("snapshot ensemble needs keep >= 2, got {keep}")));
    }
    let cfg = TrainConfig {
        checkpoint_interval_epochs: Some(interval),
        ..config.clone()
    };
    if cfg.epochs / interval.max(1) < keep {
        return Err(Error::config(format!(
            "{} epochs at interval {interval} yield fewer than {keep} checkpoints",
            cfg.epochs
        )));
    }
    let (_, checkpoints) = train(model, &dataset.label_samples(), &cfg)?;
    mcmc_from_checkpoints(&checkpoints, keep)
}

/// Fine-tunes every classification member towards mean expert votes, preserving order.
///
/// `train_sets` follows the same one-per-member or shared convention as [`build_ce`]. Member
/// `i` shuffles with substream `i` of `config.seed`.
pub fn build_eae<T: Real>(
    ce: &Ensemble<T>,
    train_sets: &[Dataset<T>],
    config: &TrainConfig,
) -> Result<Ensemble<T>> {
    if ce.kind() != &EnsembleKind::Classification {
        return Err(Error::input("expert-aware ensemble must start from a classification ensemble"));
    }
    check_sets(train_sets, ce.members().len())?;
    if let Some(bad) = train_sets.iter().position(|s| !s.has_votes()) {
        return Err(Error::input(format!("training set {bad} lacks expert votes")));
    }
    let members = ce
        .members()
        .par_iter()
        .enumerate()
        .map(|(i, m)| {
            let cfg = config.clone().with_seed(seed::derive(config.seed, "eae-finetune", i as u64));
            finetune_to_experts(m, member_set(train_sets, i), &cfg)
                .map_err(|e| Error::Member { member: i, source: Box::new(e) })
        })
        .collect::<Result<Vec<_>>>()?;
    Ensemble::new(members, EnsembleKind::ExpertAware, ce.member_seeds().to_vec())
}

/// Spread of `n_passes` dropout forward passes of `model` at `x`.
///
/// `rate` must equal the model's own dropout rate.
pub fn mc_dropout_std<T: Real>(model: &Mlp<T>, x: &[T], n_passes: usize, rate: T, seed: u64) -> Result<T> {
    if n_passes < 2 {
        return Err(Error::input(format!("MC dropout needs at least 2 passes, got {n_passes}")));
    }
    if (model.dropout_rate() - rate).abs() > T::lit(1e-9) {
        return Err(Error::input(format!(
            "inference dropout rate {rate} differs from the model's {}",
            model.dropout_rate()
        )));
    }
    Ensemble::dropout(model.clone(), n_passes, seed)?.std(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synthesize, SyntheticConfig};

    /// Constant-output model: zero weights, bias = logit(p).
    fn constant(p: f64) -> Mlp<f64> {
        let logit = (p / (1.0 - p)).ln();
        Mlp::from_parts(vec![2, 1], vec![vec![0.0, 0.0]], vec![vec![logit]], 0.0).unwrap()
    }

    fn ensemble_of(ps: &[f64]) -> Ensemble<f64> {
        Ensemble::new(ps.iter().map(|&p| constant(p)).collect(), EnsembleKind::Classification, vec![0; ps.len()])
            .unwrap()
    }

    fn tiny() -> Dataset<f64> {
        synthesize(&SyntheticConfig { n_examples: 24, n_features: 3, seed: 2, ..Default::default() }).unwrap()
    }

    fn quick(epochs: usize) -> TrainConfig {
        TrainConfig { epochs, initial_lr: 0.05, batch_size: 8, ..TrainConfig::classification() }
    }

    #[test]
    fn mean_of_members() {
        let x = [0.0, 0.0];
        assert!((ensemble_of(&[0.2, 0.4, 0.6]).mean(&x).unwrap() - 0.4).abs() < 1e-15);
        assert!((ensemble_of(&[0.3]).mean(&x).unwrap() - 0.3).abs() < 1e-15);
        let same = ensemble_of(&[0.7; 20]);
        assert_eq!(same.mean(&x).unwrap(), constant(0.7).forward(&x, DropoutMode::Deterministic).unwrap());
        assert!(Ensemble::<f64>::new(vec![], EnsembleKind::Classification, vec![]).is_err());
    }

    #[test]
    fn std_of_members() {
        let x = [1.0, -1.0];
        assert_eq!(ensemble_of(&[0.6; 4]).std(&x).unwrap(), 0.0);
        assert!((ensemble_of(&[1e-12, 1.0 - 1e-12]).std(&x).unwrap() - 0.5).abs() < 1e-11);
        assert!(ensemble_of(&[0.6]).std(&x).is_err());
    }

    #[test]
    fn ce_members_differ_and_repeat() {
        let data = [tiny()];
        let cfg = CeConfig { k: 2, hidden: vec![4], train: quick(5), master_seed: 3, ..Default::default() };
        let a = build_ce(&data, &cfg).unwrap();
        assert_eq!(a.ensemble.members().len(), 2);
        assert_ne!(a.ensemble.members()[0], a.ensemble.members()[1]);
        assert_eq!(a.ensemble, build_ce(&data, &cfg).unwrap().ensemble);
        assert!(build_ce(&data, &CeConfig { k: 1, ..cfg.clone() }).is_err());
        assert!(matches!(
            build_ce(&[tiny(), tiny(), tiny()], &cfg),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn ce_member_error_names_index() {
        let data = [tiny()];
        let mut cfg = CeConfig { k: 2, hidden: vec![4], train: quick(3), ..Default::default() };
        cfg.train.initial_lr = f64::INFINITY;
        assert!(matches!(build_ce(&data, &cfg), Err(Error::Config(_)) | Err(Error::Member { .. })));
    }

    #[test]
    fn snapshot_selection() {
        let m = Mlp::new(&[3, 4, 1], 0.0, 1).unwrap();
        let data = tiny();
        let e = build_mcmc_ensemble(&m, &data, &quick(150), 15, 10).unwrap();
        assert_eq!(e.kind(), &EnsembleKind::McmcSnapshots { epochs: (1..=10).map(|i| i * 15).collect() });
        let e = build_mcmc_ensemble(&m, &data, &quick(300), 15, 10).unwrap();
        assert_eq!(e.kind(), &EnsembleKind::McmcSnapshots { epochs: (11..=20).map(|i| i * 15).collect() });
        assert!(matches!(build_mcmc_ensemble(&m, &data, &quick(150), 15, 1), Err(Error::Config(_))));
        assert!(matches!(build_mcmc_ensemble(&m, &data, &quick(100), 15, 10), Err(Error::Config(_))));
    }

    #[test]
    fn dropout_spread() {
        let m = Mlp::new(&[3, 8, 1], 0.0, 1).unwrap();
        let x = [0.5, 0.1, -0.3];
        assert_eq!(mc_dropout_std(&m, &x, 50, 0.0, 9).unwrap(), 0.0);
        let m = m.with_dropout_rate(0.2).unwrap();
        let a = mc_dropout_std(&m, &x, 50, 0.2, 9).unwrap();
        assert!(a > 0.0);
        assert_eq!(a, mc_dropout_std(&m, &x, 50, 0.2, 9).unwrap());
        assert!(mc_dropout_std(&m, &x, 1, 0.2, 9).is_err());
        assert!(mc_dropout_std(&m, &x, 50, 0.5, 9).is_err());
    }

    #[test]
    fn eae_identity_and_order() {
        let data = [tiny()];
        let cfg = CeConfig { k: 3, hidden: vec![4], train: quick(4), ..Default::default() };
        let ce = build_ce(&data, &cfg).unwrap().ensemble;
        let zero = TrainConfig { epochs: 0, ..TrainConfig::finetune() };
        let eae = build_eae(&ce, &data, &zero).unwrap();
        assert_eq!(eae.members(), ce.members());
        assert_eq!(eae.kind(), &EnsembleKind::ExpertAware);
        let tuned = build_eae(&ce, &data, &TrainConfig { epochs: 3, initial_lr: 0.05, ..TrainConfig::finetune() }).unwrap();
        assert_eq!(tuned.members().len(), 3);
        assert!(build_eae(&tuned, &data, &zero).is_err());

        let mut no_votes = tiny().into_examples();
        no_votes.iter_mut().for_each(|e| e.expert_votes = None);
        assert!(build_eae(&ce, &[Dataset::new(no_votes).unwrap()], &zero).is_err());
    }

    #[test]
    fn directory_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let e = Ensemble::new(
            vec![Mlp::<f64>::new(&[2, 3, 1], 0.2, 1).unwrap(), Mlp::new(&[2, 3, 1], 0.2, 2).unwrap()],
            EnsembleKind::McmcSnapshots { epochs: vec![15, 30] },
            vec![15, 30],
        )
        .unwrap();
        e.save_dir(dir.path()).unwrap();
        assert_eq!(Ensemble::<f64>::load_dir(dir.path()).unwrap(), e);
    }
}
