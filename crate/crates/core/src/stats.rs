//! Pearson correlation, lagged cross-correlation and the autocorrelation function.

use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatsError {
    #[error("series is constant; correlation is undefined")]
    ConstantSeries,
    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("series of length {len} too short (need at least {needed})")]
    TooShort { len: usize, needed: usize },
}

pub type Result<T> = std::result::Result<T, StatsError>;

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(StatsError::TooShort {
            len: x.len(),
            needed: 2,
        });
    }
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ConstantSeries);
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// `r[l] = pearson(x[0..n-l], y[l..n])` for `l = 0..=max_lag`: `x` leads `y`.
pub fn lagged_correlation(x: &[f64], y: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n <= max_lag + 1 {
        return Err(StatsError::TooShort {
            len: n,
            needed: max_lag + 2,
        });
    }
    (0..=max_lag)
        .map(|l| pearson(&x[..n - l], &y[l..]))
        .collect()
}

/// Autocorrelation with the global mean and variance:
/// `rho(l) = sum_t (x_t - m)(x_{t+l} - m) / sum_t (x_t - m)^2`.
pub fn acf(x: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    let n = x.len();
    if n <= max_lag + 1 {
        return Err(StatsError::TooShort {
            len: n,
            needed: max_lag + 2,
        });
    }
    let m = mean(x);
    let centered: Vec<f64> = x.iter().map(|v| v - m).collect();
    let denom: f64 = centered.iter().map(|v| v * v).sum();
    if denom == 0.0 {
        return Err(StatsError::ConstantSeries);
    }
    Ok((0..=max_lag)
        .map(|l| {
            centered[..n - l]
                .iter()
                .zip(&centered[l..])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                / denom
        })
        .collect())
}

/// One correlation entry; `r` is `None` when undefined (constant input).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub series_a: String,
    pub series_b: String,
    pub lag: usize,
    pub r: Option<f64>,
}

/// Pairwise coefficients, a lag profile and an ACF, in long format.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub pairs: Vec<CorrelationEntry>,
    pub lag_profile: Vec<CorrelationEntry>,
    pub acf: Vec<CorrelationEntry>,
    /// Human-readable notes about undefined cells.
    pub diagnostics: Vec<String>,
}

impl CorrelationReport {
    pub fn add_pair(&mut self, a: &str, x: &[f64], b: &str, y: &[f64]) {
        let r = match pearson(x, y) {
            Ok(r) => Some(r),
            Err(e) => {
                self.diagnostics.push(format!("{a} vs {b}: {e}"));
                None
            }
        };
        self.pairs.push(CorrelationEntry {
            series_a: a.into(),
            series_b: b.into(),
            lag: 0,
            r,
        });
    }

    pub fn add_lag_profile(&mut self, a: &str, x: &[f64], b: &str, y: &[f64], max_lag: usize) {
        let n = x.len().min(y.len());
        for l in 0..=max_lag {
            let r = if n > l + 1 {
                pearson(&x[..n - l], &y[l..n])
            } else {
                Err(StatsError::TooShort {
                    len: n,
                    needed: l + 2,
                })
            };
            if let Err(e) = &r {
                self.diagnostics.push(format!("{a} -> {b} lag {l}: {e}"));
            }
            self.lag_profile.push(CorrelationEntry {
                series_a: a.into(),
                series_b: b.into(),
                lag: l,
                r: r.ok(),
            });
        }
    }

    pub fn add_acf(&mut self, a: &str, x: &[f64], max_lag: usize) {
        match acf(x, max_lag) {
            Ok(rho) => self.acf.extend(rho.into_iter().enumerate().map(|(l, r)| CorrelationEntry {
                series_a: a.into(),
                series_b: a.into(),
                lag: l,
                r: Some(r),
            })),
            Err(e) => {
                self.diagnostics.push(format!("acf {a}: {e}"));
                self.acf.extend((0..=max_lag).map(|l| CorrelationEntry {
                    series_a: a.into(),
                    series_b: a.into(),
                    lag: l,
                    r: None,
                }));
            }
        }
    }

    /// `series_a,series_b,lag,r` rows; undefined cells read `undefined`.
    pub fn write_table<W: Write>(entries: &[CorrelationEntry], sink: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["series_a", "series_b", "lag", "r"])?;
        for e in entries {
            w.write_record([
                e.series_a.clone(),
                e.series_b.clone(),
                e.lag.to_string(),
                e.r.map(|r| r.to_string()).unwrap_or_else(|| "undefined".into()),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pearson_examples() {
        assert!((pearson(&[1., 2., 3.], &[2., 4., 6.]).unwrap() - 1.0).abs() < 1e-15);
        assert!((pearson(&[1., 2., 3.], &[3., 2., 1.]).unwrap() + 1.0).abs() < 1e-15);
        // cov = 4, var = 5 and 5 (sums of centered products)
        let r = pearson(&[1., 2., 3., 4.], &[1., 3., 2., 4.]).unwrap();
        assert!((r - 0.8).abs() < 1e-15);
    }

    #[test]
    fn pearson_errors() {
        assert_eq!(pearson(&[1., 1., 1.], &[1., 2., 3.]), Err(StatsError::ConstantSeries));
        assert_eq!(pearson(&[1., 2.], &[1., 2., 3.]), Err(StatsError::LengthMismatch(2, 3)));
        assert!(matches!(pearson(&[1.], &[1.]), Err(StatsError::TooShort { .. })));
    }

    #[test]
    fn exact_shift_peaks_at_its_lag() {
        let x: Vec<f64> = (0..60).map(|i| ((i * 37) % 11) as f64 + (i as f64 * 0.3).sin()).collect();
        let mut y = vec![0.0; 60];
        y[3..].copy_from_slice(&x[..57]);
        let prof = lagged_correlation(&x, &y, 6).unwrap();
        assert!((prof[3] - 1.0).abs() < 1e-12);
        let best = prof
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(best, 3);
        assert_eq!(prof[0], pearson(&x, &y).unwrap());
    }

    #[test]
    fn acf_basics() {
        let x = [1.0, 3.0, 2.0, 5.0, 4.0];
        assert!((acf(&x, 2).unwrap()[0] - 1.0).abs() < 1e-15);
        assert_eq!(acf(&[2.0; 5], 1), Err(StatsError::ConstantSeries));
        assert!(matches!(acf(&x, 4), Err(StatsError::TooShort { .. })));
    }

    #[test]
    fn report_marks_undefined_cells() {
        let mut rep = CorrelationReport::default();
        rep.add_pair("N", &[1., 2., 3.], "V", &[5., 5., 5.]);
        assert_eq!(rep.pairs[0].r, None);
        assert_eq!(rep.diagnostics.len(), 1);
        let mut buf = Vec::new();
        CorrelationReport::write_table(&rep.pairs, &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().contains("N,V,0,undefined"));
    }
}
