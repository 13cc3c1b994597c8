use ndarray::{Array2, Axis};
use proptest::prelude::*;
use rand::Rng;
use sentalpha_core::ml::smote::{balance, segment_distance};
use sentalpha_core::ml::svm::{kkt_violation, svm_train_with_dual};
use sentalpha_core::ml::{
    bagging_train, classification_metrics, forest_train_with, smote, FittedPipeline, ForestParams, Label,
    MaxFeatures, MetricsReport, PipelineConfig, SvmParams,
};
use sentalpha_core::rng;

fn labels(signs: &[bool]) -> Vec<Label> {
    signs.iter().map(|&s| if s { Label::Up } else { Label::Down }).collect()
}

/// Rows and labels with both classes present.
fn dataset(max_rows: usize, cols: usize) -> impl Strategy<Value = (Array2<f64>, Vec<Label>)> {
    (6..max_rows).prop_flat_map(move |n| {
        (
            prop::collection::vec(-3.0f64..3.0, n * cols),
            prop::collection::vec(any::<bool>(), n),
        )
            .prop_filter("both classes", |(_, y)| y.iter().any(|&b| b) && y.iter().any(|&b| !b))
            .prop_map(move |(v, y)| (Array2::from_shape_vec((n, cols), v).unwrap(), labels(&y)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn svm_dual_stays_feasible_and_ascends(
        (x, y) in dataset(40, 2),
        c in 0.1f64..10.0,
        gamma in 0.05f64..2.0,
    ) {
        let params = SvmParams { c, gamma, tol: 1e-3, max_passes: 200 };
        let (model, alpha) = svm_train_with_dual(x.view(), &y, &params).unwrap();
        let sum: f64 = alpha.iter().zip(&y).map(|(a, l)| a * l.as_f64()).sum();
        prop_assert!(sum.abs() <= 1e-8, "sum alpha y = {sum}");
        prop_assert!(alpha.iter().all(|&a| (0.0..=c).contains(&a)));
        for w in model.objective_trace.windows(2) {
            prop_assert!(w[1] >= w[0] - 1e-10 * w[0].abs().max(1.0), "dual fell: {:?}", w);
        }
        if model.converged {
            let kkt = kkt_violation(x.view(), &y, &alpha, c, gamma);
            prop_assert!(kkt <= params.tol + 1e-9, "kkt {kkt}");
        }
    }

    #[test]
    fn smote_points_lie_on_parent_segments(
        rows in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 3), 2..12),
        k in 1usize..6,
        count in 0usize..40,
        seed in any::<u64>(),
    ) {
        let m = Array2::from_shape_vec((rows.len(), 3), rows.concat()).unwrap();
        let out = smote(m.view(), k, count, seed).unwrap();
        prop_assert_eq!(out.rows.nrows(), count);
        for (s, &(a, b)) in out.parents.iter().enumerate() {
            let p = out.rows.row(s).to_vec();
            let d = segment_distance(&p, &m.row(a).to_vec(), &m.row(b).to_vec());
            prop_assert!(d <= 1e-9, "synthetic row {s} is {d} off its segment");
            prop_assert!(a != b);
            prop_assert!((0.0..1.0).contains(&out.weights[s]));
        }
        prop_assert_eq!(smote(m.view(), k, count, seed).unwrap(), out);
    }

    #[test]
    fn balancing_equalizes_classes((x, y) in dataset(40, 2), seed in any::<u64>()) {
        let ups = y.iter().filter(|&&l| l == Label::Up).count();
        prop_assume!(ups.min(y.len() - ups) >= 2);
        let (xb, yb) = balance(x.view(), &y, 5, seed).unwrap();
        let ups_b = yb.iter().filter(|&&l| l == Label::Up).count();
        prop_assert_eq!(2 * ups_b, yb.len());
        prop_assert_eq!(xb.nrows(), yb.len());
        prop_assert_eq!(xb.slice(ndarray::s![..x.nrows(), ..]), x.view());
    }

    #[test]
    fn bagging_is_seed_deterministic((x, y) in dataset(30, 2), seed in any::<u64>()) {
        let params = SvmParams::default();
        let a = bagging_train(x.view(), &y, 3, &params, seed).unwrap();
        let b = bagging_train(x.view(), &y, 3, &params, seed).unwrap();
        prop_assert_eq!(a.predict(x.view()).unwrap(), b.predict(x.view()).unwrap());
        prop_assert_eq!(&a, &b);
    }

    #[test]
    fn forest_importances_follow_column_permutations(
        (x, y) in dataset(60, 4),
        perm in Just((0..4usize).collect::<Vec<_>>()).prop_shuffle(),
        seed in any::<u64>(),
    ) {
        let params = ForestParams { max_features: MaxFeatures::All, ..ForestParams::with_trees(5) };
        let a = forest_train_with(x.view(), &y, &params, seed).unwrap();
        let xp = x.select(Axis(1), &perm);
        let b = forest_train_with(xp.view(), &y, &params, seed).unwrap();
        let total: f64 = a.importances().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
        prop_assert_eq!(a.trees.len(), 5);
        for (j, &src) in perm.iter().enumerate() {
            prop_assert!(
                (b.importances()[j] - a.importances()[src]).abs() <= 1e-12,
                "column {src} moved to {j}: {:?} vs {:?}", a.importances(), b.importances()
            );
        }
    }

    #[test]
    fn f1_is_a_harmonic_mean(truth in prop::collection::vec(any::<bool>(), 1..80), flips in prop::collection::vec(any::<bool>(), 80)) {
        let t = labels(&truth);
        let p: Vec<Label> = t.iter().zip(&flips).map(|(l, &f)| if f { l.flipped() } else { *l }).collect();
        let m = classification_metrics(&t, &p).unwrap();
        prop_assert_eq!(m, MetricsReport::from_counts(m.tp, m.fp, m.tn, m.fn_));
        prop_assert_eq!(m.total(), t.len());
        if m.precision > 0.0 && m.recall > 0.0 {
            let lo = m.precision.min(m.recall);
            let hi = m.precision.max(m.recall);
            prop_assert!(m.f1 >= lo - 1e-15 && m.f1 <= hi + 1e-15);
        }
        for v in [m.accuracy, m.precision, m.recall, m.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }
}

#[test]
fn pipeline_is_reproducible_and_serializable() {
    let mut r = rng::stream(11, "pipeline-test", 0);
    let n = 80;
    let x = Array2::from_shape_fn((n, 3), |_| r.random_range(-1.0..1.0));
    let y: Vec<Label> = (0..n).map(|i| Label::from_return(x[[i, 0]] + 0.3 * x[[i, 1]])).collect();
    let cfg = PipelineConfig::default();
    let a = FittedPipeline::fit(x.view(), &y, &cfg, 4).unwrap();
    let b = FittedPipeline::fit(x.view(), &y, &cfg, 4).unwrap();
    assert_eq!(a, b);
    let back = FittedPipeline::from_json(&a.to_json()).unwrap();
    assert_eq!(back.predict(x.view()).unwrap(), a.predict(x.view()).unwrap());
    let acc = classification_metrics(&y, &a.predict(x.view()).unwrap()).unwrap().accuracy;
    assert!(acc > 0.85, "training accuracy {acc}");
}
