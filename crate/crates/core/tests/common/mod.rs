#![allow(dead_code)]

use chrono::{Duration, NaiveDate};
use sentalpha_core::features::Dataset;
use sentalpha_core::market_data::{align_calendar, DailyBar, DateSpan};
use sentalpha_core::sentiment::daily_counts;
use sentalpha_core::synth::{generate, SynthConfig, SynthOutput};

pub fn day(k: i64) -> NaiveDate {
    NaiveDate::from_ymd_opt(2021, 1, 4).unwrap() + Duration::days(k)
}

/// Align a synthetic dataset the way `ingest` does.
pub fn dataset_of(out: &SynthOutput) -> Dataset {
    let span = DateSpan::new(out.bars[0].date, out.bars.last().unwrap().date);
    let aligned = align_calendar(&out.bars, span).unwrap();
    let counts = daily_counts(&out.tweets, span);
    Dataset::new(aligned, &counts).unwrap()
}

pub fn synth_dataset(cfg: &SynthConfig) -> (SynthOutput, Dataset) {
    let out = generate(cfg).unwrap();
    let data = dataset_of(&out);
    (out, data)
}

/// A valid bar with the given close, spread around it.
pub fn bar(date: NaiveDate, close: f64, volume: f64) -> DailyBar {
    DailyBar {
        date,
        open: close * 0.99,
        high: close * 1.02,
        low: close * 0.97,
        close,
        volume,
        trade_value: close * volume,
        interpolated: false,
    }
}

/// The dataset as it looked at the end of day `t`: nothing dated after `t`.
pub fn truncated_at(out: &SynthOutput, t: NaiveDate) -> Dataset {
    let bars: Vec<DailyBar> = out.bars.iter().filter(|b| b.date <= t).cloned().collect();
    let span = DateSpan::new(bars[0].date, bars.last().unwrap().date);
    let tweets: Vec<_> = out
        .tweets
        .iter()
        .filter(|tw| tw.timestamp.date_naive() <= t)
        .copied()
        .collect();
    Dataset::new(align_calendar(&bars, span).unwrap(), &daily_counts(&tweets, span)).unwrap()
}
