//! Standardize, SMOTE-balance, then fit a bagged RBF-SVM ensemble.

use super::bagging::{bagging_train, EnsembleModel};
use super::smote::balance;
use super::standardize::{fit_standardizer, Standardizer};
use super::svm::SvmParams;
use super::{check_labels, Label, MlError, Result};
use crate::rng;
use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

pub const FORMAT_VERSION: u32 = 1;

/// How the RBF width is chosen for each fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GammaRule {
    /// `1 / (P * var)` with `var` the variance of all cells of the
    /// standardized, balanced training matrix.
    Scale,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub c: f64,
    pub gamma: GammaRule,
    pub members: usize,
    pub smote_k: usize,
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: GammaRule::Scale,
            members: 9,
            smote_k: 5,
            tol: 1e-3,
            max_passes: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Predictor {
    /// The training window held a single class.
    Constant(Label),
    Ensemble(EnsembleModel),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub format_version: u32,
    pub config: PipelineConfig,
    pub seed: u64,
    pub standardizer: Standardizer,
    /// RBF width actually used.
    pub gamma: f64,
    /// False when the minority class was too small to oversample.
    pub balanced: bool,
    pub predictor: Predictor,
}

pub(crate) fn scale_gamma(x: ArrayView2<f64>) -> f64 {
    let n = x.len() as f64;
    if n == 0.0 || x.ncols() == 0 {
        return 1.0;
    }
    let mean = x.sum() / n;
    let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    if var > 0.0 {
        1.0 / (x.ncols() as f64 * var)
    } else {
        1.0
    }
}

impl FittedPipeline {
    pub fn fit(x: ArrayView2<f64>, y: &[Label], config: &PipelineConfig, seed: u64) -> Result<Self> {
        check_labels(x.nrows(), y)?;
        if config.members == 0 {
            return Err(MlError::InvalidParameter("ensemble needs at least one member".into()));
        }
        let standardizer = fit_standardizer(x);
        let z = standardizer.apply(x);
        let ups = y.iter().filter(|&&l| l == Label::Up).count();
        let mut out = Self {
            format_version: FORMAT_VERSION,
            config: *config,
            seed,
            standardizer,
            gamma: 1.0,
            balanced: false,
            predictor: Predictor::Constant(Label::Up),
        };
        if ups == 0 || ups == y.len() {
            out.predictor = Predictor::Constant(y[0]);
            return Ok(out);
        }
        let minority = ups.min(y.len() - ups);
        let (xb, yb) = if minority >= 2 {
            out.balanced = true;
            balance(z.view(), y, config.smote_k, rng::substream(seed, "smote", 0))?
        } else {
            log::debug!("minority class has {minority} row(s); skipping SMOTE");
            (z, y.to_vec())
        };
        out.gamma = match config.gamma {
            GammaRule::Scale => scale_gamma(xb.view()),
            GammaRule::Fixed(g) => g,
        };
        let params = SvmParams {
            c: config.c,
            gamma: out.gamma,
            tol: config.tol,
            max_passes: config.max_passes,
        };
        let ens = bagging_train(
            xb.view(),
            &yb,
            config.members,
            &params,
            rng::substream(seed, "bagging", 0),
        )?;
        out.predictor = Predictor::Ensemble(ens);
        Ok(out)
    }

    pub fn n_features(&self) -> usize {
        self.standardizer.n_features()
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<Label>> {
        if x.ncols() != self.n_features() {
            return Err(MlError::DimensionMismatch {
                expected: self.n_features(),
                got: x.ncols(),
            });
        }
        match &self.predictor {
            Predictor::Constant(l) => Ok(vec![*l; x.nrows()]),
            Predictor::Ensemble(e) => e.predict(self.standardizer.apply(x).view()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("pipeline serializes")
    }

    pub fn from_json(text: &str) -> std::result::Result<Self, String> {
        let p: Self = serde_json::from_str(text).map_err(|e| e.to_string())?;
        if p.format_version != FORMAT_VERSION {
            return Err(MlError::FormatVersion(p.format_version).to_string());
        }
        Ok(p)
    }
}
