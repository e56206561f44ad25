//! Performance mathematics: confusion counts, rates, ROC/AUC, EER operating
//! points, one-vs-rest aggregation and regression error.

mod confusion;
mod export;
mod regression;
mod report;
mod roc;

pub use confusion::{binary_rates, confusion_binary, BinaryRates, ConfusionMatrix2};
pub use export::{write_report_csv, write_report_json, write_roc_csv, write_roc_svg};
pub use regression::{regression_metrics, RegressionMetrics};
pub use report::{
    macro_average, micro_precision, one_vs_rest_report, weighted_macro_average, Aggregate, ClassReport, EvalReport,
};
pub use roc::{auc, eer_threshold, nearest_operating_point, roc_curve, EerPoint, RocCurve, RocPoint};

use thiserror::Error;

use crate::dataset::CrashRisk;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("{0} is undefined (zero denominator)")]
    UndefinedRate(&'static str),
    #[error("ROC needs at least one positive and one negative")]
    SingleClass,
    #[error("class {0} has no observations")]
    MissingClass(CrashRisk),
    #[error("observed values have zero variance; R is undefined")]
    ZeroVariance,
    #[error("nothing to evaluate")]
    Empty,
}
