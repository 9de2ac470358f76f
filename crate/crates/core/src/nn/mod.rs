//! Minimal CNN training engine.
//!
//! Forward/backward for same-padded rectangular convolution, channel
//! concatenation, 2x2 max pooling, fully-connected layers, ReLU, softmax
//! cross-entropy, and Adam. Enough to train and score every candidate the
//! search produces, nothing more.

mod adam;
mod conv;
mod linear;
mod loss;
mod network;
mod pool;
mod train;

pub use adam::{adam_step, AdamParams, AdamState};
pub use conv::{
    concat_channels, conv2d_backward, conv2d_forward, conv2d_forward_counted, split_grad,
    ConvBranch,
};
pub use linear::{fully_connected_backward, fully_connected_forward, Linear};
pub use loss::{batch_softmax_cross_entropy, softmax_cross_entropy};
pub use network::{count_forward_mults, count_forward_mults_detailed, MultCount, Network};
pub use pool::{maxpool2x2, maxpool2x2_backward, PoolMask};
pub use train::{evaluate_top1, relu_backward, relu_forward, train, LrDrop, TrainConfig, TrainTrace};

use thiserror::Error;

/// Errors raised by the training engine.
#[derive(Debug, Error)]
pub enum NnError {
    #[error("{layer}: shape mismatch, expected {expected}, got {actual}")]
    ShapeMismatch {
        layer: String,
        expected: String,
        actual: String,
    },
    #[error(
        "channel concat requires equal batch/spatial dims across branches \
         (same-padding contract): part {part} is {actual}, expected {expected}"
    )]
    ConcatMismatch {
        part: usize,
        expected: String,
        actual: String,
    },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("non-finite {what} encountered at epoch {epoch}, batch {batch}")]
    NonFinite {
        what: String,
        epoch: usize,
        batch: usize,
    },
    #[error("adam step aborted: gradient contains non-finite values")]
    NonFiniteGrad,
    #[error("dataset is empty")]
    EmptyDataset,
}
