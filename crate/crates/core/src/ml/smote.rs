//! Synthetic minority over-sampling.
//!
//! Each synthetic row is `x + u * (x_nn - x)` with `x` a random minority row,
//! `x_nn` one of its `k` nearest minority neighbors (Euclidean, ties broken
//! by row index) and `u ~ U[0, 1)`.

use super::{check_labels, Label, MlError, Result};
use crate::rng;
use ndarray::{concatenate, Array2, ArrayView2, Axis};
use rand::Rng;

#[derive(Debug, Clone, PartialEq)]
pub struct SmoteOutput {
    pub rows: Array2<f64>,
    /// `(base, neighbor)` minority row indices of each synthetic row.
    pub parents: Vec<(usize, usize)>,
    /// Interpolation weight `u` of each synthetic row.
    pub weights: Vec<f64>,
}

/// `k` nearest neighbors of every row, excluding itself.
fn neighbors(x: ArrayView2<f64>, k: usize) -> Vec<Vec<usize>> {
    let m = x.nrows();
    (0..m)
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..m)
                .filter(|&j| j != i)
                .map(|j| {
                    let d2: f64 = x
                        .row(i)
                        .iter()
                        .zip(x.row(j).iter())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    (d2, j)
                })
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            d.into_iter().take(k).map(|(_, j)| j).collect()
        })
        .collect()
}

pub fn smote(
    minority: ArrayView2<f64>,
    k_neighbors: usize,
    n_synthetic: usize,
    seed: u64,
) -> Result<SmoteOutput> {
    let m = minority.nrows();
    if m < 2 {
        return Err(MlError::TooFewMinority(m));
    }
    if k_neighbors == 0 {
        return Err(MlError::InvalidParameter("k_neighbors must be >= 1".into()));
    }
    let p = minority.ncols();
    let mut rows = Array2::zeros((n_synthetic, p));
    let mut parents = Vec::with_capacity(n_synthetic);
    let mut weights = Vec::with_capacity(n_synthetic);
    if n_synthetic == 0 {
        return Ok(SmoteOutput {
            rows,
            parents,
            weights,
        });
    }
    let nn = neighbors(minority, k_neighbors.min(m - 1));
    let mut rng = rng::stream(seed, "smote", 0);
    for s in 0..n_synthetic {
        let base = rng.random_range(0..m);
        let nb = nn[base][rng.random_range(0..nn[base].len())];
        let u: f64 = rng.random();
        for j in 0..p {
            let a = minority[[base, j]];
            rows[[s, j]] = a + u * (minority[[nb, j]] - a);
        }
        parents.push((base, nb));
        weights.push(u);
    }
    Ok(SmoteOutput {
        rows,
        parents,
        weights,
    })
}

/// Append synthetic minority rows until both classes have equal counts.
pub fn balance(
    x: ArrayView2<f64>,
    y: &[Label],
    k_neighbors: usize,
    seed: u64,
) -> Result<(Array2<f64>, Vec<Label>)> {
    check_labels(x.nrows(), y)?;
    let ups = y.iter().filter(|&&l| l == Label::Up).count();
    let downs = y.len() - ups;
    if ups == downs {
        return Ok((x.to_owned(), y.to_vec()));
    }
    let minority_label = if ups < downs { Label::Up } else { Label::Down };
    let idx: Vec<usize> = (0..y.len()).filter(|&i| y[i] == minority_label).collect();
    let minority = x.select(Axis(0), &idx);
    let out = smote(minority.view(), k_neighbors, ups.abs_diff(downs), seed)?;
    let xs = concatenate(Axis(0), &[x, out.rows.view()]).expect("same width");
    let mut ys = y.to_vec();
    ys.extend(std::iter::repeat_n(minority_label, out.rows.nrows()));
    Ok((xs, ys))
}

/// Distance from `p` to the segment `[a, b]`.
pub fn segment_distance(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let ab: Vec<f64> = a.iter().zip(b).map(|(x, y)| y - x).collect();
    let ap: Vec<f64> = a.iter().zip(p).map(|(x, y)| y - x).collect();
    let len2: f64 = ab.iter().map(|v| v * v).sum();
    let t = if len2 > 0.0 {
        (ab.iter().zip(&ap).map(|(u, v)| u * v).sum::<f64>() / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    a.iter()
        .zip(&ab)
        .zip(p)
        .map(|((a, d), p)| {
            let q = a + t * d;
            (p - q) * (p - q)
        })
        .sum::<f64>()
        .sqrt()
}
