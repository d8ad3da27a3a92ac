//! Feed-forward binary classifier, exact backpropagation and SGD training.

mod finetune;
mod grad;
mod io;
mod model;
mod train;

pub use finetune::finetune_to_experts;
pub use grad::{loss_and_gradient, Gradients, Loss, Sample};
pub use model::{dropout_mask, sigmoid, Activation, DropoutMode, Mlp};
pub use train::{train, Checkpoint, LrSchedule, TrainConfig};

/// Default architecture: 16 inputs, one hidden layer of 16 ReLU units, one output.
pub const DEFAULT_HIDDEN: &[usize] = &[16];

/// `[input_dim, hidden..., 1]`.
pub fn layer_sizes(input_dim: usize, hidden: &[usize]) -> Vec<usize> {
    std::iter::once(input_dim)
        .chain(hidden.iter().copied())
        .chain(std::iter::once(1))
        .collect()
}
