//! Column-wise z-scoring fitted on training rows only.

use ndarray::{Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    /// Sample standard deviations (n - 1); zero for constant columns.
    pub stds: Vec<f64>,
}

pub fn fit_standardizer(x: ArrayView2<f64>) -> Standardizer {
    let n = x.nrows();
    let mut means = Vec::with_capacity(x.ncols());
    let mut stds = Vec::with_capacity(x.ncols());
    for col in x.axis_iter(Axis(1)) {
        let mean = if n == 0 { 0.0 } else { col.sum() / n as f64 };
        let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
        let std = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
        means.push(mean);
        stds.push(std);
    }
    Standardizer { means, stds }
}

impl Standardizer {
    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    /// Zero-variance columns map to 0.
    pub fn apply(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for (j, mut col) in out.axis_iter_mut(Axis(1)).enumerate() {
            let (m, s) = (self.means[j], self.stds[j]);
            col.mapv_inplace(|v| if s > 0.0 { (v - m) / s } else { 0.0 });
        }
        out
    }
}
