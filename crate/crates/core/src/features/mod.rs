//! Feature ranking, redundancy pruning and min-max scaling.

mod correlation;
mod extra_trees;
mod minmax;
mod selection;

pub use correlation::{pearson_columns, pearson_matrix, window_means, CorrelationMatrix};
pub use extra_trees::{extra_trees_importance, extra_trees_importance_rows, ExtraTreesConfig, ImportanceVector};
pub use minmax::{apply_minmax, fit_minmax, NormalizationParams};
pub use selection::{select_features, write_correlation_csv, write_selection_csv, SelectionReport};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("all targets are identical; importance is undefined")]
    DegenerateTarget,
    #[error("tree_count must be at least 1")]
    NoTrees,
    #[error("dataset is empty")]
    Empty,
}
