//! Comparison models trained on the same prepared windows as the CNN. All
//! three read the window flattened to `timesteps · F` inputs.

mod mlp;
mod svm;
mod tree;

pub use mlp::{train_bp_mlp, MlpConfig, MlpModel};
pub use svm::{train_binary_svm, train_svm_ovr, SvmConfig, SvmModel};
pub use tree::{fit_tree_rows, train_decision_tree, walk, TreeConfig, TreeModel, TreeNode, SPLIT_TIE_TOLERANCE};

use thiserror::Error;

use crate::dataset::Dataset;
use crate::features::NormalizationParams;

#[derive(Debug, Error)]
pub enum BaselineError {
    #[error("training loss became non-finite at epoch {epoch}")]
    NonFiniteLoss { epoch: usize },
    #[error("all training targets are equal")]
    DegenerateTarget,
    #[error("feature mismatch: model expects [{expected}], got [{found}]")]
    FeatureMismatch { expected: String, found: String },
    #[error("training data must be min-max normalized first")]
    NotNormalized,
    #[error("training data is empty")]
    EmptyDataset,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

fn training_norm(train: &Dataset) -> Result<NormalizationParams, BaselineError> {
    let norm = train.normalization.clone().ok_or(BaselineError::NotNormalized)?;
    if train.is_empty() {
        return Err(BaselineError::EmptyDataset);
    }
    Ok(norm)
}

fn check_features(expected: &[String], found: &[String]) -> Result<(), BaselineError> {
    if expected != found {
        return Err(BaselineError::FeatureMismatch { expected: expected.join(" "), found: found.join(" ") });
    }
    Ok(())
}

fn check_width(expected: usize, values: &[f64], names: &[String]) -> Result<(), BaselineError> {
    if values.len() != expected {
        return Err(BaselineError::FeatureMismatch {
            expected: names.join(" "),
            found: format!("{} values per window", values.len()),
        });
    }
    Ok(())
}
