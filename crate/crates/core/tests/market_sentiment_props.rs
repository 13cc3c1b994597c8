mod common;

use chrono::{Duration, FixedOffset, NaiveDate, TimeZone};
use common::{bar, day};
use proptest::prelude::*;
use sentalpha_core::market_data::{align_calendar, compute_returns, parse_bars, write_aligned, DailyBar, DateSpan};
use sentalpha_core::sentiment::{
    bucket_session, daily_counts, sentiment_score, LabeledTweet, SentimentLabel, Session, SessionCounts,
};

/// Trading bars separated by gaps of one to four calendar days.
fn bars_strategy() -> impl Strategy<Value = Vec<DailyBar>> {
    prop::collection::vec((1i64..=4, 50.0f64..150.0, 1e5f64..1e7), 2..40).prop_map(|steps| {
        let mut k = 0;
        steps
            .into_iter()
            .enumerate()
            .map(|(i, (gap, close, vol))| {
                if i > 0 {
                    k += gap;
                }
                bar(day(k), close, vol)
            })
            .collect()
    })
}

fn span_of(bars: &[DailyBar]) -> DateSpan {
    DateSpan::new(bars[0].date, bars.last().unwrap().date)
}

fn between(v: f64, a: f64, b: f64) -> bool {
    v >= a.min(b) && v <= a.max(b)
}

proptest! {
    #[test]
    fn alignment_is_idempotent(bars in bars_strategy()) {
        let span = span_of(&bars);
        let once = align_calendar(&bars, span).unwrap();
        let twice = align_calendar(&once, span).unwrap();
        prop_assert_eq!(&once, &twice);
        prop_assert_eq!(once.len(), span.len());
    }

    #[test]
    fn filled_days_stay_inside_their_bracket(bars in bars_strategy()) {
        let aligned = align_calendar(&bars, span_of(&bars)).unwrap();
        let mut prev: Option<&DailyBar> = None;
        for (i, b) in aligned.iter().enumerate() {
            if !b.interpolated {
                prev = Some(b);
                prop_assert!(bars.contains(b), "trading bar altered");
                continue;
            }
            let a = prev.unwrap();
            let next = aligned[i..].iter().find(|x| !x.interpolated).unwrap();
            for (v, lo, hi) in [
                (b.open, a.open, next.open),
                (b.high, a.high, next.high),
                (b.low, a.low, next.low),
                (b.close, a.close, next.close),
                (b.volume, a.volume, next.volume),
                (b.trade_value, a.trade_value, next.trade_value),
            ] {
                prop_assert!(between(v, lo, hi), "{v} outside [{lo}, {hi}] on {}", b.date);
            }
            prop_assert!(b.check().is_ok());
        }
    }

    #[test]
    fn returns_rebuild_the_closes(bars in bars_strategy()) {
        let aligned = align_calendar(&bars, span_of(&bars)).unwrap();
        let r = compute_returns(&aligned).unwrap();
        prop_assert_eq!(r.len(), aligned.len() - 1);
        let mut close = aligned[0].close;
        for (b, v) in aligned[1..].iter().zip(r.values()) {
            close *= 1.0 + v;
            prop_assert!(((close - b.close) / b.close).abs() <= 1e-12);
        }
        for (b, &t) in aligned[1..].iter().zip(r.trading_flags()) {
            prop_assert_eq!(t, !b.interpolated);
        }
    }

    #[test]
    fn aligned_file_reads_back(bars in bars_strategy()) {
        let aligned = align_calendar(&bars, span_of(&bars)).unwrap();
        let r = compute_returns(&aligned).unwrap();
        let mut buf = Vec::new();
        write_aligned(&aligned, &r, &mut buf).unwrap();
        let back = parse_bars(buf.as_slice()).unwrap();
        prop_assert_eq!(back, aligned);
    }

    #[test]
    fn score_is_bounded_and_antisymmetric(p in 0u64..500, n in 0u64..500, z in 0u64..500) {
        let c = SessionCounts { date: day(0), session: Session::PreMarket, positive: p, negative: n, neutral: z };
        let s = sentiment_score(&c).score;
        prop_assert!(s.abs() <= 1.0);
        let swapped = SessionCounts { positive: n, negative: p, ..c };
        prop_assert_eq!(sentiment_score(&swapped).score, -s);
        let more = SessionCounts { neutral: z + 1, ..c };
        let s2 = sentiment_score(&more).score;
        prop_assert!(s2.abs() <= s.abs());
        if p != n {
            prop_assert!(s2.abs() < s.abs());
        }
        if p + n + z == 0 {
            prop_assert_eq!(s, 0.0);
            prop_assert!(sentiment_score(&c).imputed);
        }
    }

    #[test]
    fn full_day_is_the_sum_of_sessions(
        tweets in prop::collection::vec((0i64..5, 0u32..86_400, 0u8..3), 0..200),
        offset_hours in -8i32..=8,
    ) {
        let tz = FixedOffset::east_opt(offset_hours * 3600).unwrap();
        let labeled: Vec<LabeledTweet> = tweets
            .iter()
            .map(|&(d, sec, l)| {
                let local = day(d).and_hms_opt(sec / 3600, (sec / 60) % 60, sec % 60).unwrap();
                LabeledTweet {
                    timestamp: tz.from_local_datetime(&local).single().unwrap(),
                    label: [SentimentLabel::Positive, SentimentLabel::Negative, SentimentLabel::Neutral][l as usize],
                }
            })
            .collect();
        let span = DateSpan::new(day(0), day(4));
        let counts = daily_counts(&labeled, span);
        prop_assert_eq!(counts.len(), 5 * 4);
        for chunk in counts.chunks(4) {
            let full = chunk[3];
            prop_assert_eq!(full.session, Session::FullDay);
            let sum = |f: fn(&SessionCounts) -> u64| chunk[..3].iter().map(f).sum::<u64>();
            prop_assert_eq!(full.positive, sum(|c| c.positive));
            prop_assert_eq!(full.negative, sum(|c| c.negative));
            prop_assert_eq!(full.neutral, sum(|c| c.neutral));
        }
        // Brute-force recount per (date, session).
        for c in &counts {
            let want = labeled
                .iter()
                .filter(|t| t.timestamp.date_naive() == c.date)
                .filter(|t| c.session == Session::FullDay || bucket_session(&t.timestamp) == c.session)
                .count() as u64;
            prop_assert_eq!(c.total(), want);
        }
    }
}

#[test]
fn friday_to_monday_is_filled_by_thirds() {
    let fri = NaiveDate::from_ymd_opt(2021, 1, 8).unwrap();
    let mon = fri + Duration::days(3);
    let bars = [bar(fri, 100.0, 1.0), bar(mon, 106.0, 1.0)];
    let aligned = align_calendar(&bars, DateSpan::new(fri, mon)).unwrap();
    let closes: Vec<f64> = aligned.iter().map(|b| b.close).collect();
    assert_eq!(closes, [100.0, 102.0, 104.0, 106.0]);
    assert_eq!(
        aligned.iter().map(|b| b.interpolated).collect::<Vec<_>>(),
        [false, true, true, false]
    );
}
