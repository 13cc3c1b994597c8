//! Recursive feature elimination ranked by random-forest importances.

use crate::ml::{forest_train, Label, MlError, Result};
use crate::rng;
use ndarray::{ArrayView2, Axis};

/// Keep `target` of the columns of `x`, removing the least important one per
/// round. Returns the kept column indices in ascending order.
///
/// Importance ties drop the later column.
pub fn rfe(x: ArrayView2<f64>, y: &[Label], target: usize, n_trees: usize, seed: u64) -> Result<Vec<usize>> {
    let p = x.ncols();
    if target == 0 || target > p {
        return Err(MlError::InvalidParameter(format!(
            "target feature count {target} outside 1..={p}"
        )));
    }
    let mut kept: Vec<usize> = (0..p).collect();
    let mut round = 0;
    while kept.len() > target {
        let sub = x.select(Axis(1), &kept);
        let forest = forest_train(sub.view(), y, n_trees, rng::substream(seed, "rfe", round))?;
        let imp = forest.importances();
        let mut worst = 0;
        for (j, &v) in imp.iter().enumerate() {
            if v <= imp[worst] {
                worst = j;
            }
        }
        kept.remove(worst);
        round += 1;
    }
    Ok(kept)
}
