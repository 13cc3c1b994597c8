use proptest::prelude::*;
use sentalpha_core::stats::{acf, lagged_correlation, pearson};

fn series(min: usize, max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, min..max)
}

fn pair(min: usize, max: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (min..max).prop_flat_map(|n| {
        (
            prop::collection::vec(-100.0f64..100.0, n),
            prop::collection::vec(-100.0f64..100.0, n),
        )
    })
}

fn brute_acf(x: &[f64], lag: usize) -> f64 {
    let n = x.len();
    let m = x.iter().sum::<f64>() / n as f64;
    let mut num = 0.0;
    for t in 0..n - lag {
        num += (x[t] - m) * (x[t + lag] - m);
    }
    let mut den = 0.0;
    for v in x {
        den += (v - m) * (v - m);
    }
    num / den
}

fn argmax(v: &[f64], from: usize, to: usize) -> usize {
    (from..=to).max_by(|&a, &b| v[a].total_cmp(&v[b])).unwrap()
}

proptest! {
    #[test]
    fn pearson_is_symmetric_bounded_and_affine_invariant(
        (x, y) in pair(3, 60),
        a in prop_oneof![-50.0f64..-0.1, 0.1f64..50.0],
        b in -10.0f64..10.0,
    ) {
        let r = pearson(&x, &y).unwrap();
        prop_assert!(r.abs() <= 1.0);
        prop_assert!((r - pearson(&y, &x).unwrap()).abs() <= 1e-12);
        let ax: Vec<f64> = x.iter().map(|v| a * v + b).collect();
        let r2 = pearson(&ax, &y).unwrap();
        prop_assert!((r2 - a.signum() * r).abs() <= 1e-9, "{r2} vs {r}");
    }

    #[test]
    fn acf_matches_a_double_loop(x in series(12, 200), max_lag in 0usize..10) {
        let rho = acf(&x, max_lag).unwrap();
        prop_assert_eq!(rho.len(), max_lag + 1);
        prop_assert!((rho[0] - 1.0).abs() <= 1e-12);
        for (l, r) in rho.iter().enumerate() {
            prop_assert!((r - brute_acf(&x, l)).abs() <= 1e-12);
            prop_assert!(r.abs() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn self_correlation_and_acf_agree_on_weekly_peaks(
        amp in 1.0f64..5.0,
        phase in 0usize..7,
        noise in prop::collection::vec(-0.2f64..0.2, 140),
    ) {
        let x: Vec<f64> = noise
            .iter()
            .enumerate()
            .map(|(t, e)| amp * (2.0 * std::f64::consts::PI * (t + phase) as f64 / 7.0).sin() + e)
            .collect();
        let rho = acf(&x, 10).unwrap();
        let cc = lagged_correlation(&x, &x, 10).unwrap();
        prop_assert_eq!(argmax(&rho, 1, 10), 7);
        prop_assert_eq!(argmax(&cc, 1, 10), 7);
    }
}

#[test]
fn degenerate_inputs_are_reported() {
    assert!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    assert!(pearson(&[1.0, 2.0], &[1.0]).is_err());
    assert!(acf(&[1.0, 2.0, 3.0], 2).is_err());
    assert!(lagged_correlation(&[1.0, 2.0, 3.0], &[3.0, 1.0, 2.0], 1).is_ok());
}
