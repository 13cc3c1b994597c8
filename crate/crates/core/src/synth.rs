//! Seeded synthetic bars and labeled tweets with planted return signal.
//!
//! Tweets arrive every calendar day; bars exist on weekdays only. Each
//! trading day's return follows a latent score built from the realized
//! values of the informative features:
//!
//! `z_t = sum_f w_f * x_f(t) + noise * e_t`, `R_t = vol * z_t / sqrt(sum w_f^2 + noise^2) + drift`
//!
//! where `x_f` is feature `f` standardized over the generated history.

use crate::features::{FeatureKind, FeatureSpec};
use crate::market_data::{DailyBar, DateSpan};
use crate::rng;
use crate::sentiment::{sentiment_score, LabeledTweet, SentimentLabel, Session, SessionCounts};
use crate::Label;
use chrono::{Datelike, Duration, FixedOffset, NaiveDate, TimeZone, Weekday};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

pub const MIN_DAYS: usize = 60;

/// Session windows in seconds after midnight, and their share of tweets.
const SESSIONS: [(Session, u32, u32, f64); 3] = [
    (Session::PreMarket, 0, 34_200, 0.35),
    (Session::IntraMarket, 34_200, 57_600, 0.45),
    (Session::PostMarket, 57_600, 86_400, 0.20),
];

/// Sensitivity of the positive share to a session's mood.
const MOOD_GAIN: f64 = 1.5;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedFeature {
    pub name: String,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub seed: u64,
    pub start: NaiveDate,
    /// Calendar days covered by tweets.
    pub n_days: usize,
    pub informative: Vec<PlantedFeature>,
    /// Standard deviation of the unexplained part of the latent score.
    pub noise: f64,
    pub neutral_fraction: f64,
    /// Relative amplitude of the period-7 component of negative tweets.
    pub weekly_amplitude: f64,
    /// Inclusive range of tweets per day.
    pub volume_range: (u32, u32),
    pub volatility: f64,
    pub drift: f64,
    pub start_price: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            start: NaiveDate::from_ymd_opt(2020, 3, 23).expect("valid date"),
            n_days: 730,
            informative: ["R[t-1]", "S_pre[t-0]", "S_intra[t-7]", "S_post[t-7]", "N[t-7]"]
                .into_iter()
                .map(|n| PlantedFeature {
                    name: n.into(),
                    strength: 1.0,
                })
                .collect(),
            noise: 1.0,
            neutral_fraction: 0.8,
            weekly_amplitude: 0.5,
            volume_range: (100, 400),
            volatility: 0.01,
            drift: 0.0,
            start_price: 300.0,
        }
    }
}

impl SynthConfig {
    fn planted(&self) -> Result<Vec<(FeatureSpec, f64)>, SynthError> {
        let bad = |m: String| Err(SynthError::InvalidConfig(m));
        if self.n_days < MIN_DAYS {
            return bad(format!("n_days must be >= {MIN_DAYS}, got {}", self.n_days));
        }
        if !(0.0..=1.0).contains(&self.neutral_fraction) {
            return bad(format!("neutral fraction {} outside [0, 1]", self.neutral_fraction));
        }
        if !(self.noise >= 0.0 && self.volatility > 0.0 && self.start_price > 0.0) {
            return bad("noise must be >= 0, volatility and start price > 0".into());
        }
        if !(self.weekly_amplitude >= 0.0 && self.weekly_amplitude <= 1.0) {
            return bad(format!("weekly amplitude {} outside [0, 1]", self.weekly_amplitude));
        }
        if self.volume_range.0 > self.volume_range.1 {
            return bad("volume range is empty".into());
        }
        let mut out = Vec::new();
        for p in &self.informative {
            let spec: FeatureSpec = p
                .name
                .parse()
                .map_err(|e| SynthError::InvalidConfig(format!("{e}")))?;
            if !matches!(
                spec.kind(),
                FeatureKind::Return | FeatureKind::SentimentIndex | FeatureKind::NegativeCount
            ) {
                return bad(format!("{} cannot carry planted signal", p.name));
            }
            if !(p.strength >= 0.0 && p.strength.is_finite()) {
                return bad(format!("strength of {} must be >= 0", p.name));
            }
            out.push((spec, p.strength));
        }
        let w2: f64 = out.iter().map(|(_, w)| w * w).sum::<f64>() + self.noise * self.noise;
        if w2 == 0.0 {
            return bad("signal strengths and noise are all zero".into());
        }
        Ok(out)
    }

    pub fn span(&self) -> DateSpan {
        DateSpan::new(self.start, self.start + Duration::days(self.n_days as i64 - 1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub seed: u64,
    pub informative: Vec<PlantedFeature>,
    pub noise: f64,
    pub weekly_amplitude: f64,
    /// Share of trading days whose return sign matches the noise-free latent score.
    pub oracle_accuracy: f64,
    pub trading_days: usize,
    pub tweets: usize,
}

#[derive(Debug, Clone)]
pub struct SynthOutput {
    /// Weekday bars only.
    pub bars: Vec<DailyBar>,
    pub tweets: Vec<LabeledTweet>,
    pub ground_truth: GroundTruth,
}

fn is_trading(d: NaiveDate) -> bool {
    !matches!(d.weekday(), Weekday::Sat | Weekday::Sun)
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Tweets and per-session counts for every day.
fn generate_tweets(cfg: &SynthConfig) -> (Vec<LabeledTweet>, Vec<[SessionCounts; 4]>) {
    let tz = FixedOffset::west_opt(5 * 3600).expect("valid offset");
    let mut vol_rng = rng::stream(cfg.seed, "volume", 0);
    let mut mood_rng = rng::stream(cfg.seed, "mood", 0);
    let mut tweet_rng = rng::stream(cfg.seed, "tweets", 0);
    let mut tweets = Vec::new();
    let mut counts = Vec::with_capacity(cfg.n_days);
    for d in 0..cfg.n_days {
        let date = cfg.start + Duration::days(d as i64);
        let total = vol_rng.random_range(cfg.volume_range.0..=cfg.volume_range.1);
        let season = 1.0 + cfg.weekly_amplitude * (2.0 * PI * d as f64 / 7.0).sin();
        let mut per_session = [0u32; 3];
        for _ in 0..total {
            let u: f64 = tweet_rng.random();
            let s = if u < SESSIONS[0].3 {
                0
            } else if u < SESSIONS[0].3 + SESSIONS[1].3 {
                1
            } else {
                2
            };
            per_session[s] += 1;
        }
        let mut day = Session::ALL.map(|s| SessionCounts::zero(date, s));
        for (s, &(session, lo, hi, _)) in SESSIONS.iter().enumerate() {
            let mood: f64 = StandardNormal.sample(&mut mood_rng);
            let p_neg = ((1.0 - logistic(MOOD_GAIN * mood)) * season).clamp(0.0, 1.0);
            let mut secs: Vec<u32> = (0..per_session[s])
                .map(|_| tweet_rng.random_range(lo..hi))
                .collect();
            secs.sort_unstable();
            for sec in secs {
                let label = if tweet_rng.random::<f64>() < cfg.neutral_fraction {
                    SentimentLabel::Neutral
                } else if tweet_rng.random::<f64>() < p_neg {
                    SentimentLabel::Negative
                } else {
                    SentimentLabel::Positive
                };
                let local = date.and_hms_opt(sec / 3600, (sec / 60) % 60, sec % 60).expect("valid time");
                let timestamp = tz.from_local_datetime(&local).single().expect("fixed offset");
                for c in [session, Session::FullDay] {
                    let slot = &mut day[c.index()];
                    match label {
                        SentimentLabel::Positive => slot.positive += 1,
                        SentimentLabel::Negative => slot.negative += 1,
                        SentimentLabel::Neutral => slot.neutral += 1,
                    }
                }
                tweets.push(LabeledTweet { timestamp, label });
            }
        }
        counts.push(day);
    }
    (tweets, counts)
}

fn sentiment_value(spec: &FeatureSpec, counts: &[[SessionCounts; 4]], d: usize) -> Option<f64> {
    let i = d.checked_sub(spec.lag() as usize)?;
    let c = counts[i][spec.session()?.index()];
    Some(match spec.kind() {
        FeatureKind::NegativeCount => c.negative as f64,
        _ => sentiment_score(&c).score,
    })
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len().max(1) as f64;
    let m = values.iter().sum::<f64>() / n;
    let v = values.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    (m, if v > 0.0 { v.sqrt() } else { 1.0 })
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthOutput, SynthError> {
    let planted = cfg.planted()?;
    let (tweets, counts) = generate_tweets(cfg);
    let n = cfg.n_days;

    // Standardization of the sentiment features over their full history.
    let scales: Vec<(f64, f64)> = planted
        .iter()
        .map(|(spec, _)| match spec.kind() {
            FeatureKind::Return => (0.0, cfg.volatility),
            _ => {
                let v: Vec<f64> = (0..n).filter_map(|d| sentiment_value(spec, &counts, d)).collect();
                mean_sd(&v)
            }
        })
        .collect();
    let norm = (planted.iter().map(|(_, w)| w * w).sum::<f64>() + cfg.noise * cfg.noise).sqrt();

    let mut latent_rng = rng::stream(cfg.seed, "latent", 0);
    let mut bar_rng = rng::stream(cfg.seed, "bars", 0);
    let mut bars: Vec<DailyBar> = Vec::new();
    // Interpolated close and its return on every day since the first bar.
    let mut grid_close: Vec<Option<f64>> = vec![None; n];
    let mut grid_ret: Vec<Option<f64>> = vec![None; n];
    let mut last_trading: Vec<Option<usize>> = vec![None; n];
    let mut prev: Option<usize> = None;
    let (mut hits, mut scored) = (0usize, 0usize);

    for d in 0..n {
        let date = cfg.start + Duration::days(d as i64);
        if !is_trading(date) {
            last_trading[d] = prev;
            continue;
        }
        let mut signal = 0.0;
        for ((spec, w), (m, s)) in planted.iter().zip(&scales) {
            let x = match spec.kind() {
                FeatureKind::Return => d
                    .checked_sub(spec.lag() as usize)
                    .and_then(|i| last_trading[i])
                    .and_then(|j| grid_ret[j]),
                _ => sentiment_value(spec, &counts, d),
            };
            signal += w * x.map_or(0.0, |x| (x - m) / s);
        }
        let eps: f64 = StandardNormal.sample(&mut latent_rng);
        let r = cfg.volatility * (signal + cfg.noise * eps) / norm + cfg.drift;

        let close = match prev {
            None => cfg.start_price,
            Some(p) => {
                let pc = grid_close[p].expect("trading close");
                let c = pc * (1.0 + r);
                let steps = (d - p) as f64;
                for k in 1..(d - p) {
                    let v = pc + (c - pc) * k as f64 / steps;
                    grid_ret[p + k] = Some(v / grid_close[p + k - 1].expect("filled") - 1.0);
                    grid_close[p + k] = Some(v);
                }
                grid_ret[d] = Some(c / grid_close[d - 1].expect("filled") - 1.0);
                if Label::from_return(signal) == Label::from_return(r - cfg.drift) {
                    hits += 1;
                }
                scored += 1;
                c
            }
        };
        grid_close[d] = Some(close);

        let open_prev = prev.and_then(|p| grid_close[p]).unwrap_or(close);
        let gap: f64 = StandardNormal.sample(&mut bar_rng);
        let open = open_prev * (1.0 + 0.2 * cfg.volatility * gap);
        let wick_hi: f64 = bar_rng.random::<f64>() * 0.5 * cfg.volatility;
        let wick_lo: f64 = bar_rng.random::<f64>() * 0.5 * cfg.volatility;
        let volume = bar_rng.random_range(5.0e7..1.5e8_f64).round();
        bars.push(DailyBar {
            date,
            open,
            high: open.max(close) * (1.0 + wick_hi),
            low: open.min(close) * (1.0 - wick_lo),
            close,
            volume,
            trade_value: close * volume,
            interpolated: false,
        });
        prev = Some(d);
        last_trading[d] = prev;
    }

    let ground_truth = GroundTruth {
        seed: cfg.seed,
        informative: cfg.informative.clone(),
        noise: cfg.noise,
        weekly_amplitude: cfg.weekly_amplitude,
        oracle_accuracy: if scored == 0 { 0.5 } else { hits as f64 / scored as f64 },
        trading_days: bars.len(),
        tweets: tweets.len(),
    };
    Ok(SynthOutput {
        bars,
        tweets,
        ground_truth,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            n_days: 70,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn weekday_bars_and_daily_tweets() {
        let out = generate(&small()).unwrap();
        assert!(out.bars.iter().all(|b| is_trading(b.date)));
        assert_eq!(out.bars.len(), 50);
        assert!(out.bars.iter().all(|b| b.check().is_ok()));
        let days: std::collections::BTreeSet<NaiveDate> =
            out.tweets.iter().map(|t| t.timestamp.date_naive()).collect();
        assert_eq!(days.len(), 70);
    }

    #[test]
    fn config_validation() {
        assert!(generate(&SynthConfig {
            n_days: 59,
            ..SynthConfig::default()
        })
        .is_err());
        assert!(generate(&SynthConfig {
            informative: vec![PlantedFeature {
                name: "Volume[t-1]".into(),
                strength: 1.0
            }],
            ..small()
        })
        .is_err());
    }
}
