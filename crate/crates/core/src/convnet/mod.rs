//! Minimal float64 convolution engine with analytic gradients.
//!
//! A `SegNet` is a stack of odd-kernel, stride-1, zero-padded convolutions
//! with ReLU between them and a 1x1 classifier at the end. The same
//! network runs on every pyramid level: its parameter count never depends
//! on the number of levels, and because each level is rescaled so that
//! equal physical extents subtend equal pixel counts, one compact filter
//! bank serves all depths.
//!
//! Everything is computed in f64; this engine optimizes for verifiable
//! gradients, not throughput.

mod checkpoint;
mod loss;
mod net;
mod tensor;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use loss::{masked_ce_loss, LossConfig, LossItem, LossMode, LossOutput};
pub use net::{conv2d_forward, predict_labels, ConvLayer, Forward, Gradients, SegNet};
pub use tensor::Tensor;
pub use train::{train_surfconv, EpochStat, TrainConfig, TrainImage, TrainItem};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConvError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("forward trace does not match network: {0}")]
    StateError(String),
    #[error("all pixels carry the ignore label or zero weight")]
    AllPixelsIgnored,
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: u8, classes: usize },
    #[error("level scale must be in (0, 1], got {0}")]
    InvalidScale(f64),
    #[error("loss diverged at epoch {epoch}")]
    DivergedLoss { epoch: usize },
    #[error("training dataset has no usable pixels")]
    EmptyDataset,
    #[error("checkpoint I/O failed: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad checkpoint: {0}")]
    BadCheckpoint(String),
}
