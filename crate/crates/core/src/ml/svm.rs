//! Soft-margin SVM with an RBF kernel, trained in the dual by sequential
//! minimal optimization.
//!
//! The solver works on `min f(a) = 1/2 a'Qa - e'a` subject to
//! `0 <= a_i <= C` and `y'a = 0`, with `Q_ij = y_i y_j K(x_i, x_j)`. Each step
//! picks the working pair by maximal violation for `i` and second-order gain
//! for `j`, solves the two-variable subproblem analytically and clips to the
//! box. Convergence is declared when the maximal KKT violation
//! `max_{I_up} -y G - min_{I_low} -y G` drops below `tol`.

use super::{check_labels, has_both_classes, Label, MlError, Result};
use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    /// Slack penalty.
    pub c: f64,
    /// RBF width in `exp(-gamma * |a - b|^2)`.
    pub gamma: f64,
    /// Stopping tolerance on the KKT violation.
    pub tol: f64,
    /// Budget in sweeps of `n` pair updates each.
    pub max_passes: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            gamma: 1.0,
            tol: 1e-3,
            max_passes: 100,
        }
    }
}

impl SvmParams {
    fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(MlError::InvalidParameter(format!("C must be > 0, got {}", self.c)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(MlError::InvalidParameter(format!(
                "gamma must be > 0, got {}",
                self.gamma
            )));
        }
        if !(self.tol > 0.0) || self.max_passes == 0 {
            return Err(MlError::InvalidParameter(
                "tol must be > 0 and max_passes >= 1".into(),
            ));
        }
        Ok(())
    }
}

pub fn rbf_kernel(a: &[f64], b: &[f64], gamma: f64) -> Result<f64> {
    if a.len() != b.len() {
        return Err(MlError::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(rbf(a.iter(), b.iter(), gamma))
}

#[inline]
fn rbf<'a>(a: impl Iterator<Item = &'a f64>, b: impl Iterator<Item = &'a f64>, gamma: f64) -> f64 {
    let d2: f64 = a.zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

/// Dense kernel matrix of the rows of `x`.
pub(crate) fn gram(x: ArrayView2<f64>, gamma: f64) -> Vec<f64> {
    let n = x.nrows();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        k[i * n + i] = 1.0;
        let xi = x.row(i);
        for j in 0..i {
            let v = rbf(xi.iter(), x.row(j).iter(), gamma);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    k
}

/// Trained classifier in dual form: `f(x) = sum_i coef_i K(sv_i, x) + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coefs: Vec<f64>,
    pub bias: f64,
    pub c: f64,
    pub gamma: f64,
    pub n_features: usize,
    /// False when the sweep budget ran out before the KKT tolerance was met.
    pub converged: bool,
    /// Maximal KKT violation at exit.
    pub kkt_residual: f64,
    pub iterations: usize,
    /// Dual objective `e'a - 1/2 a'Qa` after every sweep and at exit.
    pub objective_trace: Vec<f64>,
}

impl SvmModel {
    pub fn decision_function(&self, x: ArrayView1<f64>) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coefs)
            .map(|(sv, c)| c * rbf(sv.iter(), x.iter(), self.gamma))
            .sum::<f64>()
            + self.bias
    }

    /// Labels for the rows of `x`; a decision value of exactly 0 maps to `Up`.
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
            .map(|r| Label::from_decision(self.decision_function(r)))
            .collect())
    }
}

pub fn svm_train(x: ArrayView2<f64>, y: &[Label], params: &SvmParams) -> Result<SvmModel> {
    check_labels(x.nrows(), y)?;
    params.validate()?;
    let k = gram(x, params.gamma);
    let idx: Vec<usize> = (0..x.nrows()).collect();
    solve(x, &idx, &k, x.nrows(), y, params, None)
}

/// Train on rows `rows` of `x`, reading kernel values from the precomputed
/// `full_gram` (stride `stride`) of all rows of `x`.
pub(crate) fn train_on_gram(
    x: ArrayView2<f64>,
    rows: &[usize],
    full_gram: &[f64],
    stride: usize,
    y: &[Label],
    params: &SvmParams,
) -> Result<SvmModel> {
    solve(x, rows, full_gram, stride, y, params, None)
}

fn solve(
    x: ArrayView2<f64>,
    rows: &[usize],
    full_gram: &[f64],
    stride: usize,
    y: &[Label],
    params: &SvmParams,
    dual_out: Option<&mut Vec<f64>>,
) -> Result<SvmModel> {
    check_labels(rows.len(), y)?;
    params.validate()?;
    if !has_both_classes(y) {
        return Err(MlError::SingleClass);
    }
    let n = rows.len();
    let kernel = |i: usize, j: usize| full_gram[rows[i] * stride + rows[j]];
    let ys: Vec<f64> = y.iter().map(|l| l.as_f64()).collect();
    let c = params.c;
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut trace = vec![0.0];
    let max_iter = params.max_passes.saturating_mul(n.max(1));
    let mut iterations = 0;
    let mut residual;

    loop {
        // Working-set selection.
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let up = if ys[t] > 0.0 { alpha[t] < c } else { alpha[t] > 0.0 };
            if up && -ys[t] * grad[t] >= gmax {
                gmax = -ys[t] * grad[t];
                i_sel = Some(t);
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best_gain = f64::INFINITY;
        if let Some(i) = i_sel {
            let kii = kernel(i, i);
            for t in 0..n {
                let low = if ys[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < c };
                if !low {
                    continue;
                }
                let yg = ys[t] * grad[t];
                gmax2 = gmax2.max(yg);
                let b = gmax + yg;
                if b > 0.0 {
                    let mut a = kii + kernel(t, t) - 2.0 * kernel(i, t);
                    if a <= 0.0 {
                        a = TAU;
                    }
                    let gain = -(b * b) / a;
                    if gain <= best_gain {
                        best_gain = gain;
                        j_sel = Some(t);
                    }
                }
            }
        }
        residual = gmax + gmax2;
        let (i, j) = match (i_sel, j_sel) {
            (Some(i), Some(j)) if residual >= params.tol => (i, j),
            _ => {
                if !residual.is_finite() {
                    residual = 0.0;
                }
                break;
            }
        };
        if iterations >= max_iter {
            break;
        }

        // Two-variable subproblem.
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let kij = kernel(i, j);
        let mut quad = kernel(i, i) + kernel(j, j) - 2.0 * kij;
        if quad <= 0.0 {
            quad = TAU;
        }
        if ys[i] != ys[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        alpha[i] = alpha[i].clamp(0.0, c);
        alpha[j] = alpha[j].clamp(0.0, c);

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += ys[t] * (ys[i] * kernel(t, i) * di + ys[j] * kernel(t, j) * dj);
        }
        iterations += 1;
        if iterations % n == 0 {
            trace.push(dual_objective(&alpha, &ys, &kernel));
        }
    }
    trace.push(dual_objective(&alpha, &ys, &kernel));
    let converged = residual < params.tol;
    if !converged {
        log::warn!(
            "SMO stopped after {iterations} updates with KKT residual {residual:.3e} > {}",
            params.tol
        );
    }

    let bias = -rho(&alpha, &grad, &ys, c);
    if let Some(out) = dual_out {
        out.clone_from(&alpha);
    }
    let mut support_vectors = Vec::new();
    let mut dual_coefs = Vec::new();
    for t in 0..n {
        if alpha[t] > 0.0 {
            support_vectors.push(x.row(rows[t]).to_vec());
            dual_coefs.push(alpha[t] * ys[t]);
        }
    }
    Ok(SvmModel {
        support_vectors,
        dual_coefs,
        bias,
        c,
        gamma: params.gamma,
        n_features: x.ncols(),
        converged,
        kkt_residual: residual.max(0.0),
        iterations,
        objective_trace: trace,
    })
}

fn dual_objective(alpha: &[f64], ys: &[f64], kernel: &impl Fn(usize, usize) -> f64) -> f64 {
    let n = alpha.len();
    let active: Vec<usize> = (0..n).filter(|&t| alpha[t] != 0.0).collect();
    let mut quad = 0.0;
    for &s in &active {
        for &t in &active {
            quad += alpha[s] * alpha[t] * ys[s] * ys[t] * kernel(s, t);
        }
    }
    alpha.iter().sum::<f64>() - 0.5 * quad
}

/// Threshold from free support vectors, or the midpoint of the feasible
/// interval when none are free.
fn rho(alpha: &[f64], grad: &[f64], ys: &[f64], c: f64) -> f64 {
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..alpha.len() {
        let yg = ys[t] * grad[t];
        if alpha[t] >= c {
            if ys[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if ys[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    if free > 0 {
        sum_free / free as f64
    } else {
        (ub + lb) / 2.0
    }
}

/// Train and also return the full dual vector `alpha` (one entry per row).
pub fn svm_train_with_dual(
    x: ArrayView2<f64>,
    y: &[Label],
    params: &SvmParams,
) -> Result<(SvmModel, Vec<f64>)> {
    check_labels(x.nrows(), y)?;
    params.validate()?;
    let k = gram(x, params.gamma);
    let idx: Vec<usize> = (0..x.nrows()).collect();
    let mut alpha = Vec::new();
    let model = solve(x, &idx, &k, x.nrows(), y, params, Some(&mut alpha))?;
    Ok((model, alpha))
}

/// Maximal KKT violation of a dual vector, recomputed from scratch with a
/// direct double loop over the kernel.
pub fn kkt_violation(x: ArrayView2<f64>, y: &[Label], alpha: &[f64], c: f64, gamma: f64) -> f64 {
    let n = x.nrows();
    let ys: Vec<f64> = y.iter().map(|l| l.as_f64()).collect();
    let mut m = f64::NEG_INFINITY;
    let mut big_m = f64::INFINITY;
    for i in 0..n {
        let grad = (0..n)
            .map(|j| ys[i] * ys[j] * rbf(x.row(i).iter(), x.row(j).iter(), gamma) * alpha[j])
            .sum::<f64>()
            - 1.0;
        let v = -ys[i] * grad;
        let up = if ys[i] > 0.0 { alpha[i] < c } else { alpha[i] > 0.0 };
        let low = if ys[i] > 0.0 { alpha[i] > 0.0 } else { alpha[i] < c };
        if up {
            m = m.max(v);
        }
        if low {
            big_m = big_m.min(v);
        }
    }
    (m - big_m).max(0.0)
}

/// Convenience: owned copy of the support vectors as a matrix.
pub fn support_matrix(model: &SvmModel) -> Array2<f64> {
    let p = model.n_features;
    Array2::from_shape_fn((model.support_vectors.len(), p), |(i, j)| {
        model.support_vectors[i][j]
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn labels(v: &[i8]) -> Vec<Label> {
        v.iter()
            .map(|&s| if s > 0 { Label::Up } else { Label::Down })
            .collect()
    }

    #[test]
    fn rbf_examples() {
        assert_eq!(rbf_kernel(&[1.0, 2.0], &[1.0, 2.0], 0.7).unwrap(), 1.0);
        let v = rbf_kernel(&[0.0, 0.0], &[1.0, 0.0], 1.0).unwrap();
        assert!((v - (-1.0f64).exp()).abs() <= 1e-12 * v);
        assert!(matches!(
            rbf_kernel(&[0.0], &[0.0, 1.0], 1.0),
            Err(MlError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn separable_four_points() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [2.0, 0.0], [2.0, 1.0]];
        let y = labels(&[-1, -1, 1, 1]);
        let m = svm_train(x.view(), &y, &SvmParams::default()).unwrap();
        assert!(m.converged);
        assert_eq!(m.predict(x.view()).unwrap(), y);
        // each support vector predicts its own label
        let sv = support_matrix(&m);
        let own: Vec<Label> = m
            .dual_coefs
            .iter()
            .map(|c| Label::from_return(*c))
            .collect();
        assert_eq!(m.predict(sv.view()).unwrap(), own);
    }

    #[test]
    fn xor_with_rbf() {
        let x = array![[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]];
        let y = labels(&[-1, -1, 1, 1]);
        let params = SvmParams {
            c: 10.0,
            gamma: 1.0,
            ..SvmParams::default()
        };
        let m = svm_train(x.view(), &y, &params).unwrap();
        assert_eq!(m.predict(x.view()).unwrap(), y);
        let (_, alpha) = svm_train_with_dual(x.view(), &y, &params).unwrap();
        assert!(kkt_violation(x.view(), &y, &alpha, params.c, params.gamma) <= 1e-3);
    }

    #[test]
    fn single_class_and_dimension_errors() {
        let x = array![[0.0], [1.0]];
        assert_eq!(
            svm_train(x.view(), &labels(&[1, 1]), &SvmParams::default()),
            Err(MlError::SingleClass)
        );
        let m = svm_train(x.view(), &labels(&[1, -1]), &SvmParams::default()).unwrap();
        assert!(matches!(
            m.predict(array![[0.0, 1.0]].view()),
            Err(MlError::DimensionMismatch { expected: 1, got: 2 })
        ));
    }

    #[test]
    fn zero_decision_is_up() {
        let m = SvmModel {
            support_vectors: vec![vec![0.0]],
            dual_coefs: vec![0.0],
            bias: 0.0,
            c: 1.0,
            gamma: 1.0,
            n_features: 1,
            converged: true,
            kkt_residual: 0.0,
            iterations: 0,
            objective_trace: vec![],
        };
        assert_eq!(m.predict(array![[3.0]].view()).unwrap(), vec![Label::Up]);
    }

    #[test]
    fn duplicate_points_do_not_stall() {
        let x = array![[0.0], [0.0], [0.0], [1.0], [1.0]];
        let y = labels(&[-1, -1, 1, 1, 1]);
        let m = svm_train(x.view(), &y, &SvmParams::default()).unwrap();
        assert!(m.converged);
        let total: f64 = m.dual_coefs.iter().sum();
        assert!(total.abs() < 1e-8);
    }
}
