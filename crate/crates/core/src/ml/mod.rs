//! From-scratch learning kernels.
//!
//! Everything here works on dense `ndarray` matrices with [`Label`] targets.
//! [`pipeline`] chains the pieces the way the backtest uses them:
//! standardize, SMOTE-balance, then a bagged ensemble of RBF SVMs.

pub mod bagging;
pub mod forest;
pub mod metrics;
pub mod pipeline;
pub mod smote;
pub mod standardize;
pub mod svm;

pub use crate::label::Label;
pub use bagging::{bagging_train, majority_vote, EnsembleModel};
pub use forest::{forest_importances, forest_train, forest_train_with, ForestModel, ForestParams, MaxFeatures};
pub use metrics::{classification_metrics, MetricsReport};
pub use pipeline::{FittedPipeline, GammaRule, PipelineConfig, Predictor};
pub use smote::{smote, SmoteOutput};
pub use standardize::{fit_standardizer, Standardizer};
pub use svm::{rbf_kernel, svm_train, SvmModel, SvmParams};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MlError {
    #[error("training data contains a single class")]
    SingleClass,
    #[error("expected {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("SMOTE needs at least 2 minority rows, got {0}")]
    TooFewMinority(usize),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no training rows")]
    Empty,
    #[error("unsupported model format version {0}")]
    FormatVersion(u32),
}

pub type Result<T> = std::result::Result<T, MlError>;

pub(crate) fn check_labels(n_rows: usize, y: &[Label]) -> Result<()> {
    if n_rows != y.len() {
        return Err(MlError::LengthMismatch(n_rows, y.len()));
    }
    if n_rows == 0 {
        return Err(MlError::Empty);
    }
    Ok(())
}

pub(crate) fn has_both_classes(y: &[Label]) -> bool {
    y.contains(&Label::Up) && y.contains(&Label::Down)
}
