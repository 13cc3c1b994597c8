mod common;

use common::synth_dataset;
use proptest::prelude::*;
use sentalpha_core::features::{build_matrix, FeatureSpec};
use sentalpha_core::sentiment::SentimentLabel;
use sentalpha_core::stats::pearson;
use sentalpha_core::synth::{generate, PlantedFeature, SynthConfig};
use std::collections::BTreeMap;

fn cfg(seed: u64, n_days: usize, lo: u32, hi: u32) -> SynthConfig {
    SynthConfig {
        seed,
        n_days,
        volume_range: (lo, hi),
        ..SynthConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn output_is_a_function_of_the_config(seed in any::<u64>(), n in 60usize..120, lo in 0u32..30, extra in 0u32..30) {
        let c = cfg(seed, n, lo, lo + extra);
        let a = generate(&c).unwrap();
        let b = generate(&c).unwrap();
        prop_assert_eq!(&a.bars, &b.bars);
        prop_assert_eq!(&a.tweets, &b.tweets);
        prop_assert_eq!(&a.ground_truth, &b.ground_truth);

        let span = c.span();
        prop_assert!(a.bars.iter().all(|bar| bar.check().is_ok() && span.contains(bar.date)));
        prop_assert!(a.bars.windows(2).all(|w| w[0].date < w[1].date));
        prop_assert_eq!(a.ground_truth.trading_days, a.bars.len());
        prop_assert_eq!(a.ground_truth.tweets, a.tweets.len());

        let mut per_day: BTreeMap<_, u32> = BTreeMap::new();
        for t in &a.tweets {
            *per_day.entry(t.timestamp.date_naive()).or_default() += 1;
        }
        prop_assert!(per_day.keys().all(|&d| span.contains(d)));
        prop_assert!(per_day.values().all(|&k| (lo..=lo + extra).contains(&k)));
        if lo > 0 {
            prop_assert_eq!(per_day.len(), n);
        }
    }
}

#[test]
fn neutral_share_follows_the_config() {
    for frac in [0.2, 0.8] {
        let out = generate(&SynthConfig {
            neutral_fraction: frac,
            ..cfg(4, 120, 100, 200)
        })
        .unwrap();
        let neutral = out.tweets.iter().filter(|t| t.label == SentimentLabel::Neutral).count();
        let share = neutral as f64 / out.tweets.len() as f64;
        assert!((share - frac).abs() < 0.02, "neutral share {share} for {frac}");
    }
}

fn planted_correlation(seed: u64, strength: f64, column: &str) -> f64 {
    let (_, data) = synth_dataset(&SynthConfig {
        informative: vec![PlantedFeature {
            name: "S_pre[t-0]".into(),
            strength,
        }],
        noise: 1.0,
        ..cfg(seed, 400, 80, 160)
    });
    let spec: FeatureSpec = column.parse().unwrap();
    let m = build_matrix(&data, &[spec], data.span()).unwrap();
    let idx: Vec<usize> = (0..m.n_rows())
        .filter(|&i| data.returns().is_trading_day(m.dates()[i]).unwrap())
        .collect();
    let x: Vec<f64> = idx.iter().map(|&i| m.row(i)[0]).collect();
    let r: Vec<f64> = idx.iter().map(|&i| m.returns()[i]).collect();
    pearson(&x, &r).unwrap()
}

#[test]
fn planted_strength_shows_up_in_the_returns() {
    let mean = |strength: f64, col: &str| (0..5).map(|s| planted_correlation(s, strength, col)).sum::<f64>() / 5.0;
    let weak = mean(0.3, "S_pre[t-0]");
    let strong = mean(2.0, "S_pre[t-0]");
    let unplanted = mean(2.0, "S_post[t-3]");
    assert!(strong > 0.8, "strong {strong}");
    assert!(weak > 0.1 && weak < strong, "weak {weak}");
    assert!(unplanted.abs() < 0.1, "unplanted {unplanted}");
}

#[test]
fn oracle_accuracy_rises_as_noise_falls() {
    let acc = |noise: f64| {
        (0..4)
            .map(|s| generate(&SynthConfig { noise, ..cfg(s, 300, 50, 100) }).unwrap().ground_truth.oracle_accuracy)
            .sum::<f64>()
            / 4.0
    };
    let (quiet, loud) = (acc(0.2), acc(3.0));
    assert!(quiet > 0.9, "{quiet}");
    assert!(loud < quiet && loud > 0.5, "{loud}");
}

#[test]
fn bad_configs_are_rejected() {
    let too_short = generate(&cfg(0, 59, 10, 20)).unwrap_err();
    assert!(too_short.to_string().contains("n_days must be >= 60"), "{too_short}");
    assert!(generate(&cfg(0, 60, 10, 20)).is_ok());
    assert!(generate(&cfg(0, 80, 30, 20)).is_err());
    assert!(generate(&SynthConfig {
        neutral_fraction: 1.5,
        ..cfg(0, 80, 10, 20)
    })
    .is_err());
    assert!(generate(&SynthConfig {
        informative: vec![],
        noise: 0.0,
        ..cfg(0, 80, 10, 20)
    })
    .is_err());
    assert!(generate(&SynthConfig {
        informative: vec![PlantedFeature {
            name: "N[t-1]".into(),
            strength: -1.0
        }],
        ..cfg(0, 80, 10, 20)
    })
    .is_err());
}
