//! From-scratch numeric core: 1D convolution, max pooling, dense layers,
//! ReLU/sigmoid, MSE backpropagation, Adam and momentum SGD.

mod cnn;
pub mod layers;
mod optim;

pub use cnn::{
    backward, class_scores, forward, train_cnn, ClassScores, CnnConfig, CnnGradients, CnnModel, ForwardTrace,
    TrainingTrace,
};
pub use layers::{conv1d_forward, maxpool_backward, maxpool_forward, Conv1d, Dense, Matrix, Pooled};
pub use optim::{adam_step, sgd_momentum_step, AdamConfig, AdamState};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("pooling width {width} leaves no output from length {len}")]
    EmptyAfterPool { len: usize, width: usize },
    #[error("feature mismatch: model expects [{expected}], got [{found}]")]
    FeatureMismatch { expected: String, found: String },
    #[error("training loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("training data must be min-max normalized first")]
    NotNormalized,
    #[error("training data is empty")]
    EmptyDataset,
}
