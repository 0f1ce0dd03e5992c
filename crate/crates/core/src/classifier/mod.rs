//! Two-hidden-layer feedforward classifier with LeakyReLU, inverted dropout
//! and a softmax output, trained by Adam with early stopping.

mod checkpoint;
mod mlp;
mod train;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint};
pub use mlp::{
    forward, forward_batch, grad, init_params, loss, predict, sample_masks, softmax_rows, DropoutMasks, Gradients,
    MlpParams,
};
pub use train::{train, write_history, Dataset, EpochRecord, TrainConfig, TrainOutcome};
