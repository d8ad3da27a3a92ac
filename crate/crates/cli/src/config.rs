//! Run configuration file (TOML).
//!
//! Every field has a default; hyperparameters default to the published experimental setup and
//! are then scaled by `desk_scale` (epochs, snapshot interval) and `lr_scale` (learning rates).

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use eauq::data::{SplitSpec, SyntheticConfig};
use eauq::estimators::{Combination, Method};
use eauq::nn::{Loss, LrSchedule, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::UsageError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub master_seed: u64,
    /// Repetitions over fresh train/validation splits; the test pool stays fixed.
    pub n_seeds: usize,
    pub methods: Vec<Method>,
    /// Multiplier on classification epochs and the snapshot interval.
    pub desk_scale: f64,
    /// Multiplier on both learning rates.
    pub lr_scale: f64,
    pub scalar: ScalarKind,
    pub combination: Combination,
    pub data: DataSource,
    pub split: Fractions,
    pub model: ModelConfig,
    pub train: TrainSection,
    pub finetune: TrainSection,
    pub ensembles: EnsembleSizes,
    /// Used when `--out` is not given; falls back to the environment, then `eauq-out`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            master_seed: 0,
            n_seeds: 20,
            methods: Method::TABLE.to_vec(),
            desk_scale: 0.125,
            lr_scale: 100.0,
            scalar: ScalarKind::F64,
            combination: Combination::Raw,
            data: DataSource::Synthetic(SyntheticConfig::default()),
            split: Fractions::default(),
            model: ModelConfig::default(),
            train: TrainSection::from(TrainConfig::classification()),
            finetune: TrainSection::from(TrainConfig::finetune()),
            ensembles: EnsembleSizes::default(),
            output_dir: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScalarKind {
    F32,
    F64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum DataSource {
    Synthetic(SyntheticConfig),
    /// Relative paths are resolved against the config file's directory.
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fractions {
    pub train: f64,
    pub val: f64,
    pub test: f64,
}

impl Default for Fractions {
    fn default() -> Self {
        Self { train: 0.1, val: 0.1, test: 0.8 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub hidden: Vec<usize>,
    pub dropout_rate: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { hidden: eauq::nn::DEFAULT_HIDDEN.to_vec(), dropout_rate: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub initial_lr: f64,
    pub lr_schedule: LrSchedule,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub loss: Loss,
}

impl From<TrainConfig> for TrainSection {
    fn from(c: TrainConfig) -> Self {
        Self {
            epochs: c.epochs,
            initial_lr: c.initial_lr,
            lr_schedule: c.lr_schedule,
            weight_decay: c.weight_decay,
            batch_size: c.batch_size,
            loss: c.loss,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnsembleSizes {
    pub k_ce: usize,
    pub mcmc_keep: usize,
    pub mcmc_interval: usize,
    pub dropout_passes: usize,
    pub dropout_p: f64,
}

impl Default for EnsembleSizes {
    fn default() -> Self {
        Self { k_ce: 20, mcmc_keep: 10, mcmc_interval: 15, dropout_passes: 50, dropout_p: 0.2 }
    }
}

/// Hyperparameters after scaling, as actually used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Effective {
    pub train: TrainConfig,
    pub finetune: TrainConfig,
    pub mcmc_interval: usize,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| UsageError(format!("config: {e}")))?;
        Ok(cfg)
    }

    /// Reads, resolves relative data paths and validates.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        if let DataSource::Csv { path: data } = &mut cfg.data {
            if data.is_relative() {
                *data = path.parent().unwrap_or(Path::new(".")).join(&*data);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    pub fn split_spec(&self, seed: u64) -> SplitSpec {
        SplitSpec {
            train_fraction: self.split.train,
            val_fraction: self.split.val,
            test_fraction: self.split.test,
            seed,
        }
    }

    pub fn effective(&self) -> Effective {
        let scale_epochs = |e: usize| ((e as f64 * self.desk_scale).round() as usize).max(1);
        let needs_mcmc = self.methods.iter().any(|m| m.needs_mcmc());
        let mcmc_interval = scale_epochs(self.ensembles.mcmc_interval);
        let section = |s: &TrainSection, epochs: usize, checkpoints: Option<usize>| TrainConfig {
            epochs,
            initial_lr: s.initial_lr * self.lr_scale,
            lr_schedule: s.lr_schedule,
            weight_decay: s.weight_decay,
            batch_size: s.batch_size,
            seed: 0,
            checkpoint_interval_epochs: checkpoints,
            loss: s.loss,
        };
        Effective {
            train: section(&self.train, scale_epochs(self.train.epochs), needs_mcmc.then_some(mcmc_interval)),
            finetune: section(&self.finetune, self.finetune.epochs, None),
            mcmc_interval,
        }
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        let usage = |msg: String| -> anyhow::Result<()> { Err(UsageError(msg).into()) };
        if self.methods.is_empty() {
            return usage("methods must not be empty".into());
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return usage(format!("method {m} listed twice"));
            }
        }
        if self.n_seeds == 0 {
            return usage("n_seeds must be positive".into());
        }
        if !(self.desk_scale > 0.0 && self.desk_scale <= 1.0) {
            return usage(format!("desk_scale {} must lie in (0, 1]", self.desk_scale));
        }
        if !(self.lr_scale > 0.0 && self.lr_scale.is_finite()) {
            return usage("lr_scale must be positive".into());
        }
        if self.ensembles.k_ce < 2 {
            return usage("ensembles.k_ce must be at least 2".into());
        }
        if self.ensembles.dropout_passes < 2 {
            return usage("ensembles.dropout_passes must be at least 2".into());
        }
        if !(0.0..1.0).contains(&self.model.dropout_rate) || !(0.0..1.0).contains(&self.ensembles.dropout_p) {
            return usage("dropout rates must lie in [0, 1)".into());
        }
        self.split_spec(0).validate().map_err(|e| UsageError(e.to_string()))?;
        let eff = self.effective();
        eff.train.validate().map_err(|e| UsageError(format!("train: {e}")))?;
        eff.finetune.validate().map_err(|e| UsageError(format!("finetune: {e}")))?;
        if self.methods.iter().any(|m| m.needs_mcmc()) {
            let available = eff.train.epochs / eff.mcmc_interval;
            if available < self.ensembles.mcmc_keep || self.ensembles.mcmc_keep < 2 {
                return usage(format!(
                    "MCMC needs {} snapshots but {} epochs at interval {} give {available}",
                    self.ensembles.mcmc_keep, eff.train.epochs, eff.mcmc_interval
                ));
            }
        }
        match &self.data {
            DataSource::Synthetic(s) => s.validate().map_err(|e| UsageError(e.to_string()))?,
            DataSource::Csv { path } => {
                if !path.exists() {
                    return usage(format!("data file {} does not exist", path.display()));
                }
            }
        }
        Ok(())
    }

    /// Which data-dependent inputs the requested methods need.
    pub fn check_data_supports_methods(&self, has_votes: bool, has_oracle: bool) -> anyhow::Result<()> {
        for m in &self.methods {
            if (m.needs_votes_at_inference() || m.needs_finetuning()) && !has_votes {
                bail!(UsageError(format!("method {m} needs expert votes, but the dataset has none")));
            }
            if m.needs_oracle() && !has_oracle {
                bail!(UsageError(format!("method {m} needs the synthetic posterior column")));
            }
        }
        Ok(())
    }
}

pub fn read_config(path: &Path) -> anyhow::Result<RunConfig> {
    RunConfig::load(path).with_context(|| format!("loading {}", path.display()))
}
