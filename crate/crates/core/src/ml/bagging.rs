//! Bootstrap-aggregated SVM ensembles with majority voting.

use super::svm::{gram, train_on_gram, SvmModel, SvmParams};
use super::{check_labels, has_both_classes, Label, MlError, Result};
use crate::rng;
use ndarray::ArrayView2;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Redraws allowed when a bootstrap sample misses a class.
const MAX_REDRAWS: u64 = 64;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub members: Vec<SvmModel>,
    /// Seed of each member's bootstrap draw.
    pub seeds: Vec<u64>,
}

/// Size-`n` resample with replacement containing both classes.
///
/// Draws that miss a class are redrawn from the next substream index.
pub fn bootstrap_indices(y: &[Label], seed: u64) -> Result<Vec<usize>> {
    if !has_both_classes(y) {
        return Err(MlError::SingleClass);
    }
    let n = y.len();
    for attempt in 0..MAX_REDRAWS {
        let mut r = rng::stream(seed, "bootstrap", attempt);
        let idx: Vec<usize> = (0..n).map(|_| r.random_range(0..n)).collect();
        let first = y[idx[0]];
        if idx.iter().any(|&i| y[i] != first) {
            return Ok(idx);
        }
    }
    Err(MlError::SingleClass)
}

/// Train `members` SVMs, each on its own bootstrap resample of `(x, y)`.
/// Kernel values come from a single Gram matrix of `x`.
pub fn bagging_train(
    x: ArrayView2<f64>,
    y: &[Label],
    members: usize,
    params: &SvmParams,
    seed: u64,
) -> Result<EnsembleModel> {
    check_labels(x.nrows(), y)?;
    if members == 0 {
        return Err(MlError::InvalidParameter("ensemble needs at least one member".into()));
    }
    let k = gram(x, params.gamma);
    let seeds: Vec<u64> = (0..members as u64)
        .map(|m| rng::substream(seed, "member", m))
        .collect();
    let trained: Result<Vec<SvmModel>> = seeds
        .par_iter()
        .map(|&s| {
            let idx = bootstrap_indices(y, s)?;
            let ys: Vec<Label> = idx.iter().map(|&i| y[i]).collect();
            train_on_gram(x, &idx, &k, x.nrows(), &ys, params)
        })
        .collect();
    Ok(EnsembleModel {
        members: trained?,
        seeds,
    })
}

/// Majority label; ties go to `Up`.
pub fn majority_vote(votes: &[Label]) -> Label {
    let ups = votes.iter().filter(|&&v| v == Label::Up).count();
    if 2 * ups >= votes.len() {
        Label::Up
    } else {
        Label::Down
    }
}

impl EnsembleModel {
    pub fn n_features(&self) -> usize {
        self.members[0].n_features
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<Label>> {
        let per_member = self
            .members
            .iter()
            .map(|m| m.predict(x))
            .collect::<Result<Vec<_>>>()?;
        Ok((0..x.nrows())
            .map(|r| {
                let votes: Vec<Label> = per_member.iter().map(|p| p[r]).collect();
                majority_vote(&votes)
            })
            .collect())
    }
}
