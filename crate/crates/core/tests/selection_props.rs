mod common;

use common::synth_dataset;
use ndarray::Array2;
use proptest::prelude::*;
use sentalpha_core::features::{build_matrix, canonical_set, split_date, Strategy};
use sentalpha_core::ml::Label;
use sentalpha_core::selection::{bo_rfe_run, expected_improvement, rfe, BoRfeConfig, GpState, SelectionResult};
use sentalpha_core::synth::SynthConfig;
use std::collections::HashSet;

fn smooth(p: &[f64; 2]) -> f64 {
    (3.0 * p[0]).sin() + (2.0 * p[1]).cos() * 0.5
}

proptest! {
    #[test]
    fn gp_interpolates_its_observations(
        pts in prop::collection::hash_set((0u32..20, 0u32..20), 2..25),
        jitter in prop::collection::vec(-0.01f64..0.01, 25),
        queries in prop::collection::vec((0.0f64..1.0, 0.0f64..1.0), 10),
    ) {
        let points: Vec<[f64; 2]> = pts.iter().map(|&(a, b)| [a as f64 / 19.0, b as f64 / 19.0]).collect();
        let values: Vec<f64> = points.iter().zip(&jitter).map(|(p, e)| smooth(p) + e).collect();
        let gp = GpState::fit(&points, &values).unwrap();
        prop_assert_eq!(gp.n_observations(), points.len());
        for (p, v) in points.iter().zip(&values) {
            let (m, var) = gp.predict(p);
            prop_assert!(var >= 0.0);
            prop_assert!((m - v).abs() <= 3.0 * gp.noise_sd() + 1e-9, "{m} vs {v}, noise sd {}", gp.noise_sd());
        }
        for (a, b) in queries {
            prop_assert!(gp.predict(&[a, b]).1 >= 0.0);
        }
    }

    #[test]
    fn expected_improvement_is_non_negative(
        mean in -2.0f64..2.0,
        var in 0.0f64..4.0,
        best in -2.0f64..2.0,
        xi in 0.0f64..0.1,
    ) {
        let ei = expected_improvement(mean, var, best, xi);
        prop_assert!(ei >= 0.0);
        // More uncertainty never hurts.
        prop_assert!(expected_improvement(mean, var + 1.0, best, xi) >= ei - 1e-12);
    }

    #[test]
    fn rfe_keeps_the_requested_count(
        vals in prop::collection::vec(-1.0f64..1.0, 60 * 5),
        target in 1usize..=5,
        seed in any::<u64>(),
    ) {
        let x = Array2::from_shape_vec((60, 5), vals).unwrap();
        let y: Vec<Label> = (0..60).map(|i| Label::from_return(x[[i, 2]])).collect();
        prop_assume!(y.contains(&Label::Up) && y.contains(&Label::Down));
        let kept = rfe(x.view(), &y, target, 4, seed).unwrap();
        prop_assert_eq!(kept.len(), target);
        prop_assert!(kept.windows(2).all(|w| w[0] < w[1]));
        prop_assert!(kept.iter().all(|&c| c < 5));
        prop_assert_eq!(rfe(x.view(), &y, target, 4, seed).unwrap(), kept);
    }
}

#[test]
fn expected_improvement_vanishes_at_a_noiseless_incumbent() {
    assert_eq!(expected_improvement(0.7, 0.0, 0.7, 0.0), 0.0);
    assert!(expected_improvement(0.7, 1e-30, 0.7, 0.0) <= 1e-12);
    assert_eq!(expected_improvement(0.9, 0.0, 0.7, 0.0), 0.9 - 0.7);
}

fn small_run(seed: u64) -> (SelectionResult, Vec<String>) {
    let (_, data) = synth_dataset(&SynthConfig {
        seed,
        n_days: 200,
        volume_range: (40, 80),
        ..SynthConfig::default()
    });
    let specs = canonical_set(Strategy::Literature);
    let m = build_matrix(&data, &specs, data.span()).unwrap();
    let (trainval, _) = m.split_at_date(split_date(&data, 0.84).unwrap());
    let cfg = BoRfeConfig {
        iterations: 8,
        theta_max: 10,
        train_rows: 60,
        test_rows: 20,
        init_points: 4,
        seed,
        ..BoRfeConfig::default()
    };
    (bo_rfe_run(&trainval, &cfg).unwrap(), m.feature_names())
}

#[test]
fn selection_is_reproducible_and_consistent() {
    for seed in [1, 2] {
        let (a, names) = small_run(seed);
        let (b, _) = small_run(seed);
        assert_eq!(a, b);
        assert_eq!(a.features.len(), a.gamma);
        assert!(a.features.iter().all(|f| names.contains(f)));
        assert_eq!(a.history.len(), 8);
        let best = a.f1_history().into_iter().fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(a.best_f1, best);
        assert!(a.running_best().windows(2).all(|w| w[1] >= w[0]));
        let pts: HashSet<(usize, usize)> = a.history.iter().map(|e| (e.gamma, e.theta)).collect();
        assert_eq!(pts.len(), a.history.len(), "a grid point was evaluated twice");
        assert!(a.history.iter().enumerate().all(|(i, e)| e.k == i + 1));
        let back = SelectionResult::from_json(&a.to_json()).unwrap();
        assert_eq!(back, a);
    }
}
