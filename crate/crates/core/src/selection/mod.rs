//! Feature selection: recursive feature elimination whose target count and
//! forest size are tuned by Gaussian-process Bayesian optimization.

mod bo;
pub mod gp;
mod rfe;

pub use bo::{bo_rfe_run, candidate_window, objective, objective_with_features};
pub use gp::{expected_improvement, GpHyper, GpState};
pub use rfe::rfe;

use crate::features::{FeatureError, FeatureSpec};
use crate::ml::{MlError, PipelineConfig};
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SelectionError {
    #[error("invalid selection config: {0}")]
    InvalidConfig(String),
    #[error("not enough rows: need {needed}, have {available}")]
    NotEnoughRows { needed: usize, available: usize },
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, SelectionError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoRfeConfig {
    /// Total objective evaluations, including the initial design.
    pub iterations: usize,
    pub gamma_min: usize,
    /// Defaults to the number of candidate features.
    pub gamma_max: Option<usize>,
    pub theta_min: usize,
    pub theta_max: usize,
    /// Trading days of the candidate window used for fitting.
    pub train_rows: usize,
    /// Trading days after the training days used for scoring.
    pub test_rows: usize,
    pub init_points: usize,
    pub seed: u64,
    pub pipeline: PipelineConfig,
}

impl Default for BoRfeConfig {
    fn default() -> Self {
        Self {
            iterations: 50,
            gamma_min: 1,
            gamma_max: None,
            theta_min: 1,
            theta_max: 100,
            train_rows: 222,
            test_rows: 30,
            init_points: 5,
            seed: 0,
            pipeline: PipelineConfig::default(),
        }
    }
}

impl BoRfeConfig {
    pub(crate) fn gamma_range(&self, p: usize) -> Result<(usize, usize)> {
        let hi = self.gamma_max.unwrap_or(p);
        if self.gamma_min == 0 || self.gamma_min > hi || hi > p {
            return Err(SelectionError::InvalidConfig(format!(
                "gamma range {}..={hi} must lie within 1..={p}",
                self.gamma_min
            )));
        }
        Ok((self.gamma_min, hi))
    }

    pub(crate) fn validate(&self, p: usize, rows: usize) -> Result<(usize, usize)> {
        if self.iterations == 0 {
            return Err(SelectionError::InvalidConfig("iterations must be >= 1".into()));
        }
        if self.theta_min == 0 || self.theta_min > self.theta_max {
            return Err(SelectionError::InvalidConfig(format!(
                "theta range {}..={} must be non-empty and start at >= 1",
                self.theta_min, self.theta_max
            )));
        }
        if self.train_rows == 0 || self.test_rows == 0 {
            return Err(SelectionError::InvalidConfig("train and test rows must be >= 1".into()));
        }
        let needed = self.train_rows + self.test_rows;
        if needed > rows {
            return Err(SelectionError::NotEnoughRows {
                needed,
                available: rows,
            });
        }
        self.gamma_range(p)
    }
}

/// One objective evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub k: usize,
    pub gamma: usize,
    pub theta: usize,
    pub f1: f64,
    /// Canonical names of the features RFE kept.
    pub features: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub gamma: usize,
    /// Selected feature names, in candidate column order.
    pub features: Vec<String>,
    pub theta: usize,
    pub best_f1: f64,
    pub history: Vec<Evaluation>,
}

impl SelectionResult {
    pub fn f1_history(&self) -> Vec<f64> {
        self.history.iter().map(|e| e.f1).collect()
    }

    /// Running maximum of the objective over iterations.
    pub fn running_best(&self) -> Vec<f64> {
        let mut best = f64::NEG_INFINITY;
        self.history
            .iter()
            .map(|e| {
                best = best.max(e.f1);
                best
            })
            .collect()
    }

    pub fn feature_specs(&self) -> Result<Vec<FeatureSpec>> {
        self.features
            .iter()
            .map(|n| n.parse::<FeatureSpec>().map_err(SelectionError::from))
            .collect()
    }

    /// `k,gamma,theta,f1` rows.
    pub fn write_trace<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["k", "gamma", "theta", "f1"])?;
        for e in &self.history {
            w.write_record([
                e.k.to_string(),
                e.gamma.to_string(),
                e.theta.to_string(),
                e.f1.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("selection serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: Self = serde_json::from_str(text)?;
        if r.features.len() != r.gamma {
            return Err(SelectionError::InvalidConfig(format!(
                "selection lists {} features but gamma is {}",
                r.features.len(),
                r.gamma
            )));
        }
        r.feature_specs()?;
        Ok(r)
    }
}
