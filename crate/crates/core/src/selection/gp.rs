//! Gaussian-process surrogate with a Matérn-5/2 kernel and expected improvement.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

const LENGTH_SCALES: [f64; 6] = [0.05, 0.1, 0.2, 0.4, 0.8, 1.6];
const NOISE_VARIANCES: [f64; 4] = [1e-6, 1e-3, 1e-2, 0.1];

/// Kernel hyperparameters, on the standardized-target scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GpHyper {
    pub length_scales: [f64; 2],
    pub signal_variance: f64,
    pub noise_variance: f64,
}

pub fn matern52(a: &[f64; 2], b: &[f64; 2], h: &GpHyper) -> f64 {
    let r2: f64 = (0..2)
        .map(|d| ((a[d] - b[d]) / h.length_scales[d]).powi(2))
        .sum();
    let s = (5.0 * r2).sqrt();
    h.signal_variance * (1.0 + s + 5.0 * r2 / 3.0) * (-s).exp()
}

/// A GP conditioned on observations at points of the unit square.
#[derive(Debug, Clone)]
pub struct GpState {
    points: Vec<[f64; 2]>,
    values: Vec<f64>,
    hyper: GpHyper,
    y_mean: f64,
    y_scale: f64,
    chol: Cholesky<f64, Dyn>,
    alpha: DVector<f64>,
}

fn condition(points: &[[f64; 2]], z: &DVector<f64>, h: &GpHyper) -> Option<(Cholesky<f64, Dyn>, DVector<f64>, f64)> {
    let n = points.len();
    let k = DMatrix::from_fn(n, n, |i, j| {
        matern52(&points[i], &points[j], h) + if i == j { h.noise_variance } else { 0.0 }
    });
    let chol = k.cholesky()?;
    let alpha = chol.solve(z);
    let log_det: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
    let lml = -0.5 * z.dot(&alpha) - 0.5 * log_det - 0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln();
    Some((chol, alpha, lml))
}

impl GpState {
    /// Fit by maximizing the log marginal likelihood over a fixed grid of
    /// length scales and noise levels. Returns `None` without observations.
    pub fn fit(points: &[[f64; 2]], values: &[f64]) -> Option<Self> {
        assert_eq!(points.len(), values.len());
        let n = values.len();
        if n == 0 {
            return None;
        }
        let y_mean = values.iter().sum::<f64>() / n as f64;
        let var = values.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / n as f64;
        let y_scale = if var > 0.0 { var.sqrt() } else { 1.0 };
        let z = DVector::from_iterator(n, values.iter().map(|v| (v - y_mean) / y_scale));

        let mut best: Option<(f64, GpHyper, Cholesky<f64, Dyn>, DVector<f64>)> = None;
        for &l0 in &LENGTH_SCALES {
            for &l1 in &LENGTH_SCALES {
                for &noise in &NOISE_VARIANCES {
                    let h = GpHyper {
                        length_scales: [l0, l1],
                        signal_variance: 1.0,
                        noise_variance: noise,
                    };
                    let Some((chol, alpha, lml)) = condition(points, &z, &h) else {
                        continue;
                    };
                    if best.as_ref().is_none_or(|b| lml > b.0) {
                        best = Some((lml, h, chol, alpha));
                    }
                }
            }
        }
        let (_, hyper, chol, alpha) = best?;
        Some(Self {
            points: points.to_vec(),
            values: values.to_vec(),
            hyper,
            y_mean,
            y_scale,
            chol,
            alpha,
        })
    }

    pub fn hyper(&self) -> &GpHyper {
        &self.hyper
    }

    /// Observation noise standard deviation in the units of the targets.
    pub fn noise_sd(&self) -> f64 {
        self.hyper.noise_variance.sqrt() * self.y_scale
    }

    pub fn n_observations(&self) -> usize {
        self.values.len()
    }

    /// Posterior mean and variance of the latent function at `x`.
    pub fn predict(&self, x: &[f64; 2]) -> (f64, f64) {
        let kx = DVector::from_iterator(
            self.points.len(),
            self.points.iter().map(|p| matern52(p, x, &self.hyper)),
        );
        let mean = kx.dot(&self.alpha);
        let v = self.chol.l().solve_lower_triangular(&kx).expect("triangular factor is invertible");
        let var = (self.hyper.signal_variance - v.dot(&v)).max(0.0);
        (
            self.y_mean + self.y_scale * mean,
            var * self.y_scale * self.y_scale,
        )
    }
}

/// Expected improvement over `best` for a Gaussian with `mean` and `variance`.
pub fn expected_improvement(mean: f64, variance: f64, best: f64, xi: f64) -> f64 {
    let sd = variance.max(0.0).sqrt();
    let gain = mean - best - xi;
    if sd <= 1e-12 {
        return gain.max(0.0);
    }
    let z = gain / sd;
    let n = Normal::standard();
    (gain * n.cdf(z) + sd * n.pdf(z)).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matern_at_zero_distance_is_signal_variance() {
        let h = GpHyper {
            length_scales: [0.3, 0.5],
            signal_variance: 2.0,
            noise_variance: 0.0,
        };
        assert_eq!(matern52(&[0.2, 0.4], &[0.2, 0.4], &h), 2.0);
        // r = 1: (1 + sqrt5 + 5/3) exp(-sqrt5)
        let s5 = 5f64.sqrt();
        let want = 2.0 * (1.0 + s5 + 5.0 / 3.0) * (-s5).exp();
        assert!((matern52(&[0.0, 0.0], &[0.3, 0.0], &h) - want).abs() < 1e-14);
    }

    #[test]
    fn posterior_interpolates_observations() {
        let pts = [[0.1, 0.2], [0.5, 0.5], [0.9, 0.1], [0.3, 0.8]];
        let ys = [0.2, 0.7, 0.4, 0.5];
        let gp = GpState::fit(&pts, &ys).unwrap();
        for (p, y) in pts.iter().zip(ys) {
            let (m, v) = gp.predict(p);
            assert!(v >= 0.0);
            assert!((m - y).abs() <= 3.0 * gp.noise_sd() + 1e-9);
        }
    }

    #[test]
    fn ei_is_non_negative_and_zero_without_uncertainty() {
        assert_eq!(expected_improvement(0.5, 0.0, 0.5, 0.0), 0.0);
        assert_eq!(expected_improvement(0.4, 0.0, 0.5, 0.0), 0.0);
        assert!(expected_improvement(0.4, 0.01, 0.5, 0.0) > 0.0);
        // z = 0: sd * phi(0)
        let want = 0.1 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((expected_improvement(0.5, 0.01, 0.5, 0.0) - want).abs() < 1e-15);
    }
}
