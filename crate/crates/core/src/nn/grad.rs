use serde::{Deserialize, Serialize};

use super::model::{DropoutMode, Mlp};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed;

/// Training objective on the sigmoid output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Loss {
    /// Cross-entropy against a target in `[0, 1]`; soft targets are allowed.
    #[default]
    BinaryCrossEntropy,
    MeanSquaredError,
}

/// One training example: borrowed features and a target in `[0, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct Sample<'a, T> {
    pub features: &'a [T],
    pub target: T,
}

impl<'a, T> Sample<'a, T> {
    pub fn new(features: &'a [T], target: T) -> Self {
        Self { features, target }
    }
}

/// Parameter gradients, congruent with [`Mlp`] weight and bias blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub weights: Vec<Vec<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Real> Gradients<T> {
    pub fn zeros_like(model: &Mlp<T>) -> Self {
        Self {
            weights: model.weights().iter().map(|w| vec![T::zero(); w.len()]).collect(),
            biases: model.biases().iter().map(|b| vec![T::zero(); b.len()]).collect(),
        }
    }

    /// Same flat order as [`Mlp::params`].
    pub fn flat(&self) -> impl Iterator<Item = T> + '_ {
        self.weights.iter().chain(&self.biases).flatten().copied()
    }

    pub fn is_finite(&self) -> bool {
        self.flat().all(T::is_finite)
    }
}

impl Loss {
    /// Loss value and its derivative with respect to the output logit.
    fn eval<T: Real>(self, prob: T, target: T) -> (T, T) {
        let one = T::one();
        match self {
            Loss::BinaryCrossEntropy => {
                let loss = -(target * prob.ln() + (one - target) * (one - prob).ln());
                (loss, prob - target)
            }
            Loss::MeanSquaredError => {
                let diff = prob - target;
                let two = one + one;
                (diff * diff, two * diff * prob * (one - prob))
            }
        }
    }
}

/// Mean loss over `batch` and its exact gradient.
///
/// With [`DropoutMode::Active`], example `i` of the batch draws its masks from a substream of
/// the given seed, so repeated calls with the same seed see the same masks.
pub fn loss_and_gradient<T: Real>(
    model: &Mlp<T>,
    batch: &[Sample<'_, T>],
    loss: Loss,
    mode: DropoutMode,
) -> Result<(T, Gradients<T>)> {
    if batch.is_empty() {
        return Err(Error::input("empty batch"));
    }
    for s in batch {
        model.check_input(s.features)?;
        if !(s.target >= T::zero() && s.target <= T::one()) {
            return Err(Error::input(format!("target {} outside [0, 1]", s.target)));
        }
    }

    let mut grads = Gradients::zeros_like(model);
    let mut total = T::zero();
    let sizes = model.layer_sizes();
    let layers = model.num_layers();

    for (i, s) in batch.iter().enumerate() {
        let example_mode = match mode {
            DropoutMode::Deterministic => DropoutMode::Deterministic,
            DropoutMode::Active(seed) => DropoutMode::Active(seed::derive(seed, "example", i as u64)),
        };
        let trace = model.run(s.features, example_mode, true);
        let (l, dz) = loss.eval(trace.prob, s.target);
        total = total + l;

        // delta holds dL/dz for the current layer's pre-activations
        let mut delta = vec![dz];
        for layer in (0..layers).rev() {
            let n_in = sizes[layer];
            let input = &trace.inputs[layer];
            let w = &model.weights()[layer];
            let gw = &mut grads.weights[layer];
            for (o, &d) in delta.iter().enumerate() {
                grads.biases[layer][o] = grads.biases[layer][o] + d;
                let row = &mut gw[o * n_in..(o + 1) * n_in];
                row.iter_mut().zip(input).for_each(|(g, &a)| *g = *g + d * a);
            }
            if layer == 0 {
                break;
            }
            let below = layer - 1;
            let pre = &trace.hidden_pre[below];
            let mask = trace.masks.get(below);
            delta = (0..n_in)
                .map(|j| {
                    if pre[j] <= T::zero() {
                        return T::zero();
                    }
                    let back = delta
                        .iter()
                        .enumerate()
                        .fold(T::zero(), |acc, (o, &d)| acc + d * w[o * n_in + j]);
                    match mask {
                        Some(m) => back * m[j],
                        None => back,
                    }
                })
                .collect();
        }
    }

    let n = T::from_count(batch.len());
    grads
        .weights
        .iter_mut()
        .chain(grads.biases.iter_mut())
        .flatten()
        .for_each(|g| *g = *g / n);
    Ok((total / n, grads))
}
