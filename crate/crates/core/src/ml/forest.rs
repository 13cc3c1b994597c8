//! Random forest of CART trees (Gini impurity) with impurity-decrease
//! feature importances.

use super::{check_labels, has_both_classes, majority_vote, Label, MlError, Result};
use crate::rng;
use ndarray::{ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaxFeatures {
    /// `max(1, floor(sqrt(P)))` candidate features per split.
    Sqrt,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_features: MaxFeatures,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    /// Train each tree on a bootstrap resample.
    pub bootstrap: bool,
}

impl ForestParams {
    pub fn with_trees(n_trees: usize) -> Self {
        Self {
            n_trees,
            max_features: MaxFeatures::Sqrt,
            max_depth: None,
            min_samples_split: 2,
            bootstrap: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Node {
    Leaf(Label),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    nodes: Vec<Node>,
    /// Total weighted Gini decrease per feature (unnormalized).
    impurity_decrease: Vec<f64>,
}

impl DecisionTree {
    pub fn predict_row(&self, x: ArrayView1<f64>) -> Label {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf(l) => return *l,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if x[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub trees: Vec<DecisionTree>,
    /// Normalized importances, non-negative and summing to 1.
    pub importances: Vec<f64>,
    pub n_features: usize,
}

fn gini(ups: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let p = ups as f64 / n as f64;
    2.0 * p * (1.0 - p)
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: &'a [Label],
    params: &'a ForestParams,
    mtry: usize,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
    decrease: Vec<f64>,
    total: f64,
}

impl Builder<'_> {
    fn leaf(&mut self, idx: &[usize]) -> usize {
        let votes: Vec<Label> = idx.iter().map(|&i| self.y[i]).collect();
        self.nodes.push(Node::Leaf(majority_vote(&votes)));
        self.nodes.len() - 1
    }

    /// Order columns by their values on `idx`, so that equal-gain splits on
    /// different features resolve the same way under any column permutation.
    fn column_precedes(&self, idx: &[usize], a: usize, b: usize) -> bool {
        for &i in idx {
            match self.x[[i, a]].total_cmp(&self.x[[i, b]]) {
                std::cmp::Ordering::Less => return true,
                std::cmp::Ordering::Greater => return false,
                std::cmp::Ordering::Equal => {}
            }
        }
        false
    }

    fn build(&mut self, idx: &mut [usize], depth: usize) -> usize {
        let n = idx.len();
        let ups = idx.iter().filter(|&&i| self.y[i] == Label::Up).count();
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if ups == 0 || ups == n || n < self.params.min_samples_split || !depth_ok {
            return self.leaf(idx);
        }
        let parent = gini(ups, n);
        let p = self.x.ncols();
        let mut order: Vec<usize> = (0..p).collect();
        order.shuffle(&mut self.rng);

        // (gain, feature, threshold)
        let mut best: Option<(f64, usize, f64)> = None;
        let mut visited = 0;
        let mut sorted: Vec<(f64, bool)> = Vec::with_capacity(n);
        for &f in &order {
            if visited >= self.mtry {
                break;
            }
            sorted.clear();
            sorted.extend(idx.iter().map(|&i| (self.x[[i, f]], self.y[i] == Label::Up)));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
            if sorted[0].0 == sorted[n - 1].0 {
                continue;
            }
            visited += 1;
            let mut left_ups = 0;
            for k in 0..n - 1 {
                left_ups += sorted[k].1 as usize;
                if sorted[k].0 == sorted[k + 1].0 {
                    continue;
                }
                let nl = k + 1;
                let nr = n - nl;
                let gain = n as f64 * parent
                    - nl as f64 * gini(left_ups, nl)
                    - nr as f64 * gini(ups - left_ups, nr);
                let better = match best {
                    None => true,
                    Some((g, bf, _)) => gain > g || (gain == g && bf != f && self.column_precedes(idx, f, bf)),
                };
                if better {
                    let thr = sorted[k].0 + (sorted[k + 1].0 - sorted[k].0) / 2.0;
                    best = Some((gain, f, thr));
                }
            }
        }
        let Some((gain, feature, threshold)) = best else {
            return self.leaf(idx);
        };
        self.decrease[feature] += gain.max(0.0) / self.total;

        let mut mid = 0;
        for k in 0..n {
            if self.x[[idx[k], feature]] <= threshold {
                idx.swap(k, mid);
                mid += 1;
            }
        }
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf(Label::Up));
        let (l, r) = idx.split_at_mut(mid);
        let left = self.build(l, depth + 1);
        let right = self.build(r, depth + 1);
        self.nodes[at] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        at
    }
}

fn grow_tree(
    x: ArrayView2<f64>,
    y: &[Label],
    params: &ForestParams,
    seed: u64,
) -> DecisionTree {
    let n = x.nrows();
    let p = x.ncols();
    let mut rng = rng::rng_from(seed);
    let mut idx: Vec<usize> = if params.bootstrap {
        (0..n).map(|_| rng.random_range(0..n)).collect()
    } else {
        (0..n).collect()
    };
    let mtry = match params.max_features {
        MaxFeatures::Sqrt => ((p as f64).sqrt().floor() as usize).max(1),
        MaxFeatures::All => p,
    };
    let mut b = Builder {
        x,
        y,
        params,
        mtry,
        rng,
        nodes: Vec::new(),
        decrease: vec![0.0; p],
        total: idx.len() as f64,
    };
    b.build(&mut idx, 0);
    DecisionTree {
        nodes: b.nodes,
        impurity_decrease: b.decrease,
    }
}

/// Forest with `n_trees` trees and default settings (bootstrap, sqrt features).
pub fn forest_train(x: ArrayView2<f64>, y: &[Label], n_trees: usize, seed: u64) -> Result<ForestModel> {
    forest_train_with(x, y, &ForestParams::with_trees(n_trees), seed)
}

pub fn forest_train_with(
    x: ArrayView2<f64>,
    y: &[Label],
    params: &ForestParams,
    seed: u64,
) -> Result<ForestModel> {
    check_labels(x.nrows(), y)?;
    if params.n_trees == 0 {
        return Err(MlError::InvalidParameter("forest needs at least one tree".into()));
    }
    if !has_both_classes(y) {
        return Err(MlError::SingleClass);
    }
    let p = x.ncols();
    let trees: Vec<DecisionTree> = (0..params.n_trees as u64)
        .into_par_iter()
        .map(|t| grow_tree(x, y, params, rng::substream(seed, "forest", t)))
        .collect();

    // Per-tree normalization, then averaging, as in the usual MDI definition.
    let mut importances = vec![0.0; p];
    for t in &trees {
        let s: f64 = t.impurity_decrease.iter().sum();
        if s > 0.0 {
            for (acc, v) in importances.iter_mut().zip(&t.impurity_decrease) {
                *acc += v / s;
            }
        }
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        importances.iter_mut().for_each(|v| *v /= total);
    } else {
        importances.iter_mut().for_each(|v| *v = 1.0 / p as f64);
    }
    Ok(ForestModel {
        trees,
        importances,
        n_features: p,
    })
}

impl ForestModel {
    pub fn importances(&self) -> &[f64] {
        &self.importances
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Result<Vec<Label>> {
        if x.ncols() != self.n_features {
            return Err(MlError::DimensionMismatch {
                expected: self.n_features,
                got: x.ncols(),
            });
        }
        Ok(x
            .rows()
            .into_iter()
            .map(|r| {
                let votes: Vec<Label> = self.trees.iter().map(|t| t.predict_row(r)).collect();
                majority_vote(&votes)
            })
            .collect())
    }
}

/// Per-feature importances of a trained forest.
pub fn forest_importances(model: &ForestModel) -> Vec<f64> {
    model.importances.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand_distr::{Distribution, StandardNormal};

    fn planted(n: usize, p: usize, seed: u64) -> (Array2<f64>, Vec<Label>) {
        let mut r = rng::rng_from(seed);
        let x = Array2::from_shape_fn((n, p), |_| StandardNormal.sample(&mut r));
        let y = (0..n).map(|i| Label::from_return(x[[i, 0]])).collect();
        (x, y)
    }

    #[test]
    fn signal_feature_dominates() {
        let (x, y) = planted(500, 10, 1);
        let f = forest_train(x.view(), &y, 20, 7).unwrap();
        let top = f
            .importances
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0;
        assert_eq!(top, 0);
        assert!((f.importances.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(f.importances.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn one_tree_forest_is_that_tree() {
        let (x, y) = planted(80, 3, 2);
        let f = forest_train(x.view(), &y, 1, 3).unwrap();
        assert_eq!(f.trees.len(), 1);
        let tree = grow_tree(x.view(), &y, &ForestParams::with_trees(1), rng::substream(3, "forest", 0));
        assert_eq!(f.trees[0], tree);
        let by_tree: Vec<Label> = x.rows().into_iter().map(|r| tree.predict_row(r)).collect();
        assert_eq!(f.predict(x.view()).unwrap(), by_tree);
    }

    #[test]
    fn unpruned_tree_fits_training_data() {
        let (x, y) = planted(60, 2, 4);
        let params = ForestParams {
            bootstrap: false,
            max_features: MaxFeatures::All,
            ..ForestParams::with_trees(1)
        };
        let f = forest_train_with(x.view(), &y, &params, 0).unwrap();
        assert_eq!(f.predict(x.view()).unwrap(), y);
    }

    #[test]
    fn single_class_rejected() {
        let x = Array2::zeros((4, 2));
        assert_eq!(
            forest_train(x.view(), &[Label::Up; 4], 3, 0).unwrap_err(),
            MlError::SingleClass
        );
    }
}
