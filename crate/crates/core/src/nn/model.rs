use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::seed::{self, Rng};

/// Hidden-layer nonlinearity. The output unit is always a sigmoid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
}

/// Whether hidden dropout masks are sampled during a forward pass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropoutMode {
    Deterministic,
    /// Inverted dropout with masks drawn from a generator seeded by the value.
    Active(u64),
}

/// Fully connected binary classifier: ReLU hidden layers, dropout after every hidden
/// activation, single sigmoid output unit.
///
/// Weights are stored per layer in row-major `(out, in)` order.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    layer_sizes: Vec<usize>,
    weights: Vec<Vec<T>>,
    biases: Vec<Vec<T>>,
    dropout_rate: T,
    hidden_activation: Activation,
}

/// Intermediate values of one forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub(crate) struct Trace<T> {
    /// `inputs[l]` is the input to layer `l` (after activation and dropout of layer `l - 1`).
    pub inputs: Vec<Vec<T>>,
    /// Pre-activations of each hidden layer.
    pub hidden_pre: Vec<Vec<T>>,
    /// Scaled dropout masks per hidden layer; empty when no dropout was applied.
    pub masks: Vec<Vec<T>>,
    pub prob: T,
}

impl<T: Real> Mlp<T> {
    /// Glorot-uniform weights, zero biases.
    pub fn new(layer_sizes: &[usize], dropout_rate: T, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(layer_sizes, dropout_rate)?;
        let mut rng = seed::rng(seed);
        for (l, w) in model.weights.iter_mut().enumerate() {
            let (fan_in, fan_out) = (layer_sizes[l], layer_sizes[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in w.iter_mut() {
                *v = T::lit(rng.random_range(-limit..limit));
            }
        }
        Ok(model)
    }

    pub fn zeros(layer_sizes: &[usize], dropout_rate: T) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        validate_rate(dropout_rate)?;
        let weights = layer_sizes
            .windows(2)
            .map(|w| vec![T::zero(); w[0] * w[1]])
            .collect();
        let biases = layer_sizes[1..].iter().map(|&n| vec![T::zero(); n]).collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            dropout_rate,
            hidden_activation: Activation::Relu,
        })
    }

    pub fn from_parts(
        layer_sizes: Vec<usize>,
        weights: Vec<Vec<T>>,
        biases: Vec<Vec<T>>,
        dropout_rate: T,
    ) -> Result<Self> {
        validate_sizes(&layer_sizes)?;
        validate_rate(dropout_rate)?;
        let layers = layer_sizes.len() - 1;
        if weights.len() != layers || biases.len() != layers {
            return Err(Error::input(format!(
                "expected {layers} weight and bias blocks, got {} and {}",
                weights.len(),
                biases.len()
            )));
        }
        for l in 0..layers {
            let (n_in, n_out) = (layer_sizes[l], layer_sizes[l + 1]);
            if weights[l].len() != n_in * n_out || biases[l].len() != n_out {
                return Err(Error::input(format!(
                    "layer {l}: weights must be {n_out}x{n_in} and biases {n_out}"
                )));
            }
        }
        Ok(Self {
            layer_sizes,
            weights,
            biases,
            dropout_rate,
            hidden_activation: Activation::Relu,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[Vec<T>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<T>] {
        &self.biases
    }

    pub fn dropout_rate(&self) -> T {
        self.dropout_rate
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn with_dropout_rate(mut self, rate: T) -> Result<Self> {
        validate_rate(rate)?;
        self.dropout_rate = rate;
        Ok(self)
    }

    /// Total number of trainable parameters.
    pub fn param_count(&self) -> usize {
        self.weights.iter().chain(&self.biases).map(Vec::len).sum()
    }

    /// Flat view of all parameters: every weight block in layer order, then every bias block.
    pub fn params(&self) -> impl Iterator<Item = T> + '_ {
        self.weights.iter().chain(&self.biases).flatten().copied()
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut T> + '_ {
        self.weights
            .iter_mut()
            .chain(self.biases.iter_mut())
            .flatten()
    }

    pub(crate) fn blocks_mut(&mut self) -> (&mut [Vec<T>], &mut [Vec<T>]) {
        (&mut self.weights, &mut self.biases)
    }

    /// Probability of class one for `x`.
    pub fn forward(&self, x: &[T], mode: DropoutMode) -> Result<T> {
        self.check_input(x)?;
        Ok(self.run(x, mode, false).prob)
    }

    pub(crate) fn check_input(&self, x: &[T]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::input(format!(
                "feature vector has length {}, model expects {}",
                x.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Forward pass. With `keep` set, every intermediate is recorded for backprop.
    pub(crate) fn run(&self, x: &[T], mode: DropoutMode, keep: bool) -> Trace<T> {
        let hidden = self.num_layers() - 1;
        let mut rng = match mode {
            DropoutMode::Active(s) if self.dropout_rate > T::zero() => Some(seed::rng(s)),
            _ => None,
        };
        let mut trace = Trace {
            inputs: Vec::with_capacity(if keep { self.num_layers() } else { 0 }),
            hidden_pre: Vec::new(),
            masks: Vec::new(),
            prob: T::zero(),
        };

        let mut current = x.to_vec();
        for l in 0..self.num_layers() {
            let n_in = self.layer_sizes[l];
            let n_out = self.layer_sizes[l + 1];
            let w = &self.weights[l];
            let mut z: Vec<T> = self.biases[l].clone();
            for (o, zo) in z.iter_mut().enumerate() {
                let row = &w[o * n_in..(o + 1) * n_in];
                *zo = row
                    .iter()
                    .zip(&current)
                    .fold(*zo, |acc, (&wi, &xi)| acc + wi * xi);
            }
            let input = std::mem::take(&mut current);
            if keep {
                trace.inputs.push(input);
            }

            if l < hidden {
                let mut a: Vec<T> = z.iter().map(|&v| relu(v)).collect();
                if let Some(rng) = rng.as_mut() {
                    let mask = dropout_mask(rng, n_out, self.dropout_rate);
                    a.iter_mut().zip(&mask).for_each(|(v, &m)| *v = *v * m);
                    if keep {
                        trace.masks.push(mask);
                    }
                }
                if keep {
                    trace.hidden_pre.push(z);
                }
                current = a;
            } else {
                trace.prob = sigmoid(z[0]);
            }
        }
        trace
    }
}

/// Inverted-dropout mask: each entry is `0` with probability `rate`, else `1 / (1 - rate)`.
pub fn dropout_mask<T: Real>(rng: &mut Rng, n: usize, rate: T) -> Vec<T> {
    let keep_scale = T::one() / (T::one() - rate);
    let p = rate.to_f64().unwrap_or(0.0);
    (0..n)
        .map(|_| {
            if rng.random::<f64>() < p {
                T::zero()
            } else {
                keep_scale
            }
        })
        .collect()
}

#[inline]
fn relu<T: Real>(v: T) -> T {
    if v > T::zero() {
        v
    } else {
        T::zero()
    }
}

/// Logistic function, clamped to `[eps, 1 - eps]` so the output never reaches 0 or 1.
pub fn sigmoid<T: Real>(z: T) -> T {
    let p = if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    };
    if p.is_nan() {
        return p;
    }
    let eps = T::epsilon();
    p.max(eps).min(T::one() - eps)
}

fn validate_sizes(sizes: &[usize]) -> Result<()> {
    if sizes.len() < 2 {
        return Err(Error::input("layer_sizes needs at least input and output"));
    }
    if sizes.contains(&0) {
        return Err(Error::input("layer sizes must be positive"));
    }
    if *sizes.last().unwrap() != 1 {
        return Err(Error::input("binary classifier must have exactly one output unit"));
    }
    Ok(())
}

fn validate_rate<T: Real>(rate: T) -> Result<()> {
    if !(rate >= T::zero() && rate < T::one()) {
        return Err(Error::input(format!("dropout rate {rate} outside [0, 1)")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_model_outputs_half() {
        let m = Mlp::<f64>::zeros(&[3, 4, 1], 0.2).unwrap();
        for x in [[0.0, 0.0, 0.0], [5.0, -3.0, 1e6]] {
            assert_eq!(m.forward(&x, DropoutMode::Deterministic).unwrap(), 0.5);
            assert_eq!(m.forward(&x, DropoutMode::Active(3)).unwrap(), 0.5);
        }
    }

    #[test]
    fn single_unit_is_logistic() {
        let m = Mlp::<f64>::from_parts(vec![1, 1], vec![vec![1.0]], vec![vec![0.0]], 0.0).unwrap();
        assert_eq!(m.forward(&[0.0], DropoutMode::Deterministic).unwrap(), 0.5);
        let hi = m.forward(&[30.0], DropoutMode::Deterministic).unwrap();
        assert!(hi > 0.999_999 && hi < 1.0);
        let lo = m.forward(&[-800.0], DropoutMode::Deterministic).unwrap();
        assert!(lo > 0.0 && lo < 1e-12);
    }

    #[test]
    fn zero_rate_dropout_matches_deterministic() {
        let m = Mlp::<f64>::new(&[4, 8, 8, 1], 0.0, 11).unwrap();
        let x = [0.3, -1.2, 0.5, 2.0];
        assert_eq!(
            m.forward(&x, DropoutMode::Active(99)).unwrap(),
            m.forward(&x, DropoutMode::Deterministic).unwrap()
        );
    }

    #[test]
    fn dropout_is_seeded() {
        let m = Mlp::<f64>::new(&[4, 16, 1], 0.5, 1).unwrap();
        let x = [1.0, 2.0, -1.0, 0.5];
        let a = m.forward(&x, DropoutMode::Active(5)).unwrap();
        assert_eq!(a, m.forward(&x, DropoutMode::Active(5)).unwrap());
        let differs = (6..20).any(|s| m.forward(&x, DropoutMode::Active(s)).unwrap() != a);
        assert!(differs);
    }

    #[test]
    fn rejects_bad_shapes() {
        let m = Mlp::<f64>::zeros(&[2, 1], 0.0).unwrap();
        assert!(matches!(
            m.forward(&[1.0], DropoutMode::Deterministic),
            Err(Error::Input(_))
        ));
        assert!(Mlp::<f64>::zeros(&[2, 2], 0.0).is_err());
        assert!(Mlp::<f64>::zeros(&[2, 0, 1], 0.0).is_err());
        assert!(Mlp::<f64>::zeros(&[2, 1], 1.0).is_err());
        assert!(Mlp::<f64>::from_parts(vec![2, 1], vec![vec![0.0]], vec![vec![0.0]], 0.0).is_err());
    }

    #[test]
    fn glorot_bounds() {
        let m = Mlp::<f64>::new(&[10, 6, 1], 0.0, 3).unwrap();
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(m.weights()[0].iter().all(|w| w.abs() < limit));
        assert!(m.biases().iter().flatten().all(|&b| b == 0.0));
        assert_ne!(m, Mlp::<f64>::new(&[10, 6, 1], 0.0, 4).unwrap());
    }

    #[test]
    fn generic_over_f32() {
        let m = Mlp::<f32>::new(&[2, 4, 1], 0.2, 0).unwrap();
        let p = m.forward(&[0.5, -0.5], DropoutMode::Deterministic).unwrap();
        assert!(p > 0.0 && p < 1.0);
    }
}
