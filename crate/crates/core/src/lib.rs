//! Crash-risk forecasting toolkit.
//!
//! The pipeline runs in stages, each with its own module:
//!
//! - [`ingest`]: parse sensor, weather and crash logs and average readings into
//!   4-minute interval records.
//! - [`label`]: cut 3-interval lookback windows, label them with a crash risk in
//!   `{0, 0.5, 1}`, draw matched non-crash windows and split train/test.
//! - [`features`]: Pearson correlation, extra-trees importance, redundancy
//!   pruning and min-max normalization.
//! - [`neuralnet`]: the from-scratch multivariate 1D-CNN and its optimizers.
//! - [`baselines`]: backpropagation MLP, one-vs-rest linear SVM and a CART tree.
//! - [`eval`]: confusion matrices, ROC/AUC, EER operating points and
//!   micro/macro/weighted-macro aggregation.
//! - [`synthgen`]: seeded synthetic study year with a planted crash precursor.
//! - [`pipeline`]: file-level orchestration used by the command-line driver.

pub mod baselines;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod features;
pub mod ingest;
pub mod label;
pub mod modelfile;
pub mod models;
pub mod neuralnet;
pub mod pipeline;
pub mod rng;
pub mod synthgen;

pub use error::{Error, Result};

/// Width of one aggregation interval in seconds.
pub const INTERVAL_SECS: i64 = 240;

/// Number of consecutive intervals in a lookback window.
pub const TIMESTEPS: usize = 3;

/// Formats a double using the shortest decimal string that parses back to the
/// same value.
pub fn fmt_f64(value: f64) -> String {
    if value.is_nan() {
        "nan".to_string()
    } else if value.is_infinite() {
        if value > 0.0 { "inf".to_string() } else { "-inf".to_string() }
    } else {
        format!("{value}")
    }
}
