use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::grad::{loss_and_gradient, Loss, Sample};
use super::model::{DropoutMode, Mlp};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed;

/// Per-epoch learning-rate schedule. Epochs are counted from zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "factor", rename_all = "snake_case")]
pub enum LrSchedule {
    Constant,
    /// Linear from `initial_lr` at the first epoch to `0.1 * initial_lr` at the last.
    LinearDecay,
    /// `initial_lr * factor^epoch`.
    ExponentialDecay(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub initial_lr: f64,
    pub lr_schedule: LrSchedule,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub checkpoint_interval_epochs: Option<usize>,
    pub loss: Loss,
}

impl TrainConfig {
    /// Classification training: 800 epochs, lr 1e-4 with a decreasing schedule, weight decay
    /// 5e-5.
    pub fn classification() -> Self {
        Self {
            epochs: 800,
            initial_lr: 1e-4,
            lr_schedule: LrSchedule::LinearDecay,
            weight_decay: 5e-5,
            batch_size: 16,
            seed: 0,
            checkpoint_interval_epochs: None,
            loss: Loss::BinaryCrossEntropy,
        }
    }

    /// Fine-tuning towards mean expert votes: 40 epochs, lr `1e-5 * 0.99^t`, the rest as in
    /// [`TrainConfig::classification`].
    pub fn finetune() -> Self {
        Self {
            epochs: 40,
            initial_lr: 1e-5,
            lr_schedule: LrSchedule::ExponentialDecay(0.99),
            ..Self::classification()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial_lr > 0.0 && self.initial_lr.is_finite()) {
            return Err(Error::config(format!("initial_lr {} must be positive", self.initial_lr)));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::config("weight_decay must be nonnegative"));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be positive"));
        }
        if let LrSchedule::ExponentialDecay(f) = self.lr_schedule {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::config(format!("exponential decay factor {f} outside (0, 1]")));
            }
        }
        if let Some(k) = self.checkpoint_interval_epochs {
            if k == 0 || k > self.epochs {
                return Err(Error::config(format!(
                    "checkpoint interval {k} must be in 1..={}",
                    self.epochs
                )));
            }
        }
        Ok(())
    }

    /// Learning rate used throughout zero-based epoch `epoch`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        match self.lr_schedule {
            LrSchedule::Constant => self.initial_lr,
            LrSchedule::LinearDecay => {
                if self.epochs <= 1 {
                    self.initial_lr
                } else {
                    let t = epoch as f64 / (self.epochs - 1) as f64;
                    self.initial_lr * (1.0 - 0.9 * t)
                }
            }
            LrSchedule::ExponentialDecay(f) => self.initial_lr * f.powi(epoch as i32),
        }
    }
}

/// Snapshot of a model after `epoch` completed epochs.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint<T> {
    pub epoch: usize,
    pub model: Mlp<T>,
}

/// Mini-batch SGD with per-step L2 shrinkage of the weights.
///
/// Dropout is active during training whenever the model's rate is positive. The run is a pure
/// function of `(model, samples order, config)`. Checkpoints are taken after every
/// `checkpoint_interval_epochs` completed epochs, oldest first.
pub fn train<T: Real>(
    model: &Mlp<T>,
    samples: &[Sample<'_, T>],
    config: &TrainConfig,
) -> Result<(Mlp<T>, Vec<Checkpoint<T>>)> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::input("cannot train on an empty dataset"));
    }

    let mut model = model.clone();
    let mut checkpoints = Vec::new();
    let mut rng = seed::rng(config.seed);
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut batch = Vec::with_capacity(config.batch_size);
    let wd = T::lit(config.weight_decay);
    let dropout = model.dropout_rate() > T::zero();

    for epoch in 0..config.epochs {
        let lr = T::lit(config.lr_at(epoch));
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.batch_size) {
            batch.clear();
            batch.extend(chunk.iter().map(|&i| samples[i]));
            let mask_seed: u64 = rng.random();
            let mode = if dropout {
                DropoutMode::Active(mask_seed)
            } else {
                DropoutMode::Deterministic
            };
            let (loss, grads) = loss_and_gradient(&model, &batch, config.loss, mode)?;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch: epoch + 1, what: "loss" });
            }
            if !grads.is_finite() {
                return Err(Error::TrainingDiverged { epoch: epoch + 1, what: "gradient" });
            }
            let (weights, biases) = model.blocks_mut();
            for (w, g) in weights.iter_mut().zip(&grads.weights) {
                w.iter_mut()
                    .zip(g)
                    .for_each(|(w, &g)| *w = *w - lr * (g + wd * *w));
            }
            for (b, g) in biases.iter_mut().zip(&grads.biases) {
                b.iter_mut().zip(g).for_each(|(b, &g)| *b = *b - lr * g);
            }
        }
        if let Some(k) = config.checkpoint_interval_epochs {
            if (epoch + 1) % k == 0 {
                checkpoints.push(Checkpoint {
                    epoch: epoch + 1,
                    model: model.clone(),
                });
            }
        }
    }
    Ok((model, checkpoints))
}
