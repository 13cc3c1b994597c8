use super::gp::{expected_improvement, GpState};
use super::rfe::rfe;
use super::{BoRfeConfig, Evaluation, Result, SelectionError, SelectionResult};
use crate::features::FeatureMatrix;
use crate::ml::{classification_metrics, FittedPipeline};
use crate::rng;
use rand::Rng;
use rayon::prelude::*;
use std::collections::HashSet;

/// The tail of the training/validation matrix holding its last
/// `train_rows + test_rows` trading days, starting at a trading day.
pub fn candidate_window(trainval: &FeatureMatrix, config: &BoRfeConfig) -> Result<FeatureMatrix> {
    let needed = config.train_rows + config.test_rows;
    let trading: Vec<usize> = (0..trainval.n_rows()).filter(|&i| trainval.trading()[i]).collect();
    if needed > trading.len() {
        return Err(SelectionError::NotEnoughRows {
            needed,
            available: trading.len(),
        });
    }
    Ok(trainval.slice_rows(trading[trading.len() - needed], trainval.n_rows()))
}

struct Split {
    train: Vec<usize>,
    test: Vec<usize>,
}

/// The first `train_rows` trading days (with the non-trading rows between
/// them) train the model; the next `test_rows` trading days score it.
/// Training rows whose labels are only observable on or after the first
/// scoring day are dropped.
fn split_window(window: &FeatureMatrix, config: &BoRfeConfig) -> Result<Split> {
    let needed = config.train_rows + config.test_rows;
    let trading: Vec<usize> = (0..window.n_rows()).filter(|&i| window.trading()[i]).collect();
    if trading.len() < needed {
        return Err(SelectionError::NotEnoughRows {
            needed,
            available: trading.len(),
        });
    }
    let first = trading[0];
    let boundary = trading[config.train_rows];
    let cutoff = window.dates()[boundary];
    let train: Vec<usize> = (first..boundary)
        .filter(|&i| window.realized()[i] < cutoff)
        .collect();
    let test = trading[config.train_rows..needed].to_vec();
    Ok(Split { train, test })
}

fn objective_seed(config: &BoRfeConfig) -> u64 {
    rng::substream(config.seed, "objective", 0)
}

fn score(window: &FeatureMatrix, split: &Split, cols: &[usize], config: &BoRfeConfig) -> Result<f64> {
    let m = window.select_columns(cols);
    let seed = rng::substream(objective_seed(config), "pipeline", 0);
    let model = FittedPipeline::fit(
        m.design(&split.train).view(),
        &m.labels_of(&split.train),
        &config.pipeline,
        seed,
    )?;
    let pred = model.predict(m.design(&split.test).view())?;
    Ok(classification_metrics(&m.labels_of(&split.test), &pred)?.f1)
}

/// F1 on the scoring rows of the SVM pipeline trained on the RFE-selected
/// features. Returns the score and the kept column indices.
pub fn objective(
    window: &FeatureMatrix,
    gamma: usize,
    theta: usize,
    config: &BoRfeConfig,
) -> Result<(f64, Vec<usize>)> {
    let split = split_window(window, config)?;
    let x = window.design(&split.train);
    let y = window.labels_of(&split.train);
    let kept = rfe(
        x.view(),
        &y,
        gamma,
        theta,
        rng::substream(objective_seed(config), "rfe", 0),
    )?;
    let f1 = score(window, &split, &kept, config)?;
    Ok((f1, kept))
}

/// The objective with a fixed column set instead of RFE.
pub fn objective_with_features(window: &FeatureMatrix, cols: &[usize], config: &BoRfeConfig) -> Result<f64> {
    if cols.is_empty() || cols.iter().any(|&c| c >= window.n_cols()) {
        return Err(SelectionError::InvalidConfig(format!(
            "column set {cols:?} is not a non-empty subset of 0..{}",
            window.n_cols()
        )));
    }
    let split = split_window(window, config)?;
    score(window, &split, cols, config)
}

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= base as f64;
        r += f * (i % base) as f64;
        i /= base;
    }
    r
}

struct Grid {
    gamma: (usize, usize),
    theta: (usize, usize),
}

impl Grid {
    fn size(&self) -> usize {
        (self.gamma.1 - self.gamma.0 + 1) * (self.theta.1 - self.theta.0 + 1)
    }

    fn to_int(lo: usize, hi: usize, u: f64) -> usize {
        let n = hi - lo + 1;
        lo + ((u * n as f64) as usize).min(n - 1)
    }

    fn to_unit(lo: usize, hi: usize, v: usize) -> f64 {
        if hi == lo {
            0.5
        } else {
            (v - lo) as f64 / (hi - lo) as f64
        }
    }

    fn scale(&self, (g, t): (usize, usize)) -> [f64; 2] {
        [
            Self::to_unit(self.gamma.0, self.gamma.1, g),
            Self::to_unit(self.theta.0, self.theta.1, t),
        ]
    }

    /// Distinct points of a randomly shifted 2-3 Halton sequence.
    fn initial(&self, count: usize, seed: u64) -> Vec<(usize, usize)> {
        let mut r = rng::stream(seed, "halton", 0);
        let shift: [f64; 2] = [r.random(), r.random()];
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        let want = count.min(self.size());
        let mut i = 1;
        while out.len() < want && i < 100_000 {
            let u0 = (radical_inverse(i, 2) + shift[0]).fract();
            let u1 = (radical_inverse(i, 3) + shift[1]).fract();
            let p = (
                Self::to_int(self.gamma.0, self.gamma.1, u0),
                Self::to_int(self.theta.0, self.theta.1, u1),
            );
            if seen.insert(p) {
                out.push(p);
            }
            i += 1;
        }
        out
    }
}

/// Run the optimization loop on the tail of `trainval`.
pub fn bo_rfe_run(trainval: &FeatureMatrix, config: &BoRfeConfig) -> Result<SelectionResult> {
    let window = candidate_window(trainval, config)?;
    let gamma = config.validate(window.n_cols(), window.n_rows())?;
    let grid = Grid {
        gamma,
        theta: (config.theta_min, config.theta_max),
    };
    let names = window.feature_names();
    let evaluate = |k: usize, (g, t): (usize, usize)| -> Result<Evaluation> {
        let (f1, kept) = objective(&window, g, t, config)?;
        log::debug!("bo-rfe k={k} gamma={g} theta={t} f1={f1:.4}");
        Ok(Evaluation {
            k,
            gamma: g,
            theta: t,
            f1,
            features: kept.iter().map(|&c| names[c].clone()).collect(),
        })
    };

    let init = grid.initial(config.init_points.min(config.iterations).max(1), config.seed);
    let mut history: Vec<Evaluation> = init
        .par_iter()
        .enumerate()
        .map(|(i, &p)| evaluate(i + 1, p))
        .collect::<Result<_>>()?;
    let mut seen: HashSet<(usize, usize)> = init.into_iter().collect();

    while history.len() < config.iterations && seen.len() < grid.size() {
        let pts: Vec<[f64; 2]> = history.iter().map(|e| grid.scale((e.gamma, e.theta))).collect();
        let ys: Vec<f64> = history.iter().map(|e| e.f1).collect();
        let incumbent = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let gp = GpState::fit(&pts, &ys);
        let mut next: Option<((usize, usize), f64)> = None;
        for g in grid.gamma.0..=grid.gamma.1 {
            for t in grid.theta.0..=grid.theta.1 {
                if seen.contains(&(g, t)) {
                    continue;
                }
                let ei = match &gp {
                    Some(gp) => {
                        let (m, v) = gp.predict(&grid.scale((g, t)));
                        expected_improvement(m, v, incumbent, 0.0)
                    }
                    None => 0.0,
                };
                if next.is_none_or(|(_, best)| ei > best) {
                    next = Some(((g, t), ei));
                }
            }
        }
        let Some((p, _)) = next else { break };
        seen.insert(p);
        let e = evaluate(history.len() + 1, p)?;
        history.push(e);
    }

    let best = history
        .iter()
        .min_by(|a, b| {
            b.f1
                .total_cmp(&a.f1)
                .then(a.gamma.cmp(&b.gamma))
                .then(a.theta.cmp(&b.theta))
                .then(a.k.cmp(&b.k))
        })
        .expect("at least one evaluation");
    Ok(SelectionResult {
        gamma: best.gamma,
        features: best.features.clone(),
        theta: best.theta,
        best_f1: best.f1,
        history,
    })
}
