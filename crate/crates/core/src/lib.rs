//! Sentiment-augmented return-sign prediction.
//!
//! The crate covers the whole pipeline, bottom-up:
//!
//! - [`market_data`]: daily bar ingestion, weekend/holiday interpolation, returns
//! - [`sentiment`]: labeled tweet streams to per-session counts and sentiment scores
//! - [`features`]: named lagged regressors and aligned design matrices
//! - [`stats`]: Pearson, lagged cross-correlation and autocorrelation
//! - [`ml`]: standardization, RBF soft-margin SVM, SMOTE, bagging, random forest, metrics
//! - [`selection`]: recursive feature elimination tuned by Gaussian-process Bayesian optimization
//! - [`backtest`]: moving-window walk-forward evaluation and the trading simulation
//! - [`synth`]: seeded synthetic datasets with planted signal

pub mod backtest;
pub mod features;
mod label;
pub mod market_data;
pub mod ml;
pub mod rng;
pub mod selection;
pub mod sentiment;
pub mod stats;
pub mod synth;

pub use label::Label;
pub use market_data::DateSpan;
