//! Daily bars, calendar alignment and returns.
//!
//! Bars arrive on trading days only. [`align_calendar`] fills every missing
//! calendar day by linear interpolation between the bracketing trading days so
//! the financial series lines up with the seven-day tweet calendar.

use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use thiserror::Error;

/// Longest run of consecutive missing days accepted by [`align_calendar`].
pub const MAX_GAP_DAYS: i64 = 4;

#[derive(Debug, Error)]
pub enum MarketDataError {
    #[error("line {line}: {message}")]
    MalformedRecord { line: u64, message: String },
    #[error("dates not strictly increasing: {date} follows {previous}")]
    NonMonotonicDates { previous: NaiveDate, date: NaiveDate },
    #[error("{missing} consecutive days missing after {after} (limit {MAX_GAP_DAYS})")]
    GapTooWide { after: NaiveDate, missing: i64 },
    #[error("bar dated {0} lies outside the requested span")]
    BarOutsideSpan(NaiveDate),
    #[error("no bar to interpolate from at span edge {0}")]
    UncoveredEdge(NaiveDate),
    #[error("zero close price on {0}")]
    ZeroPrice(NaiveDate),
    #[error("at least two bars are required, got {0}")]
    TooFewBars(usize),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, MarketDataError>;

/// Inclusive calendar-day range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DateSpan {
    pub start: NaiveDate,
    pub end: NaiveDate,
}

impl DateSpan {
    pub fn new(start: NaiveDate, end: NaiveDate) -> Self {
        Self { start, end }
    }

    pub fn contains(&self, date: NaiveDate) -> bool {
        self.start <= date && date <= self.end
    }

    /// Number of calendar days, zero when `end < start`.
    pub fn len(&self) -> usize {
        ((self.end - self.start).num_days() + 1).max(0) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn days(&self) -> impl Iterator<Item = NaiveDate> + '_ {
        (0..self.len() as i64).map(move |k| self.start + Duration::days(k))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DailyBar {
    pub date: NaiveDate,
    pub open: f64,
    pub high: f64,
    pub low: f64,
    pub close: f64,
    pub volume: f64,
    pub trade_value: f64,
    /// Set only on days filled by [`align_calendar`].
    pub interpolated: bool,
}

impl DailyBar {
    /// Finite fields, `low <= open, close <= high`, non-negative volume.
    pub fn check(&self) -> std::result::Result<(), String> {
        let fields = [
            self.open,
            self.high,
            self.low,
            self.close,
            self.volume,
            self.trade_value,
        ];
        if fields.iter().any(|v| !v.is_finite()) {
            return Err("non-finite value".into());
        }
        if self.low > self.open.min(self.close) || self.high < self.open.max(self.close) {
            return Err(format!(
                "inconsistent range: low {} high {} open {} close {}",
                self.low, self.high, self.open, self.close
            ));
        }
        if self.volume < 0.0 || self.trade_value < 0.0 {
            return Err("negative volume or trade value".into());
        }
        Ok(())
    }

    fn lerp(a: &DailyBar, b: &DailyBar, date: NaiveDate, k: i64, steps: i64) -> DailyBar {
        let mix = |x: f64, y: f64| x + (y - x) * k as f64 / steps as f64;
        DailyBar {
            date,
            open: mix(a.open, b.open),
            high: mix(a.high, b.high),
            low: mix(a.low, b.low),
            close: mix(a.close, b.close),
            volume: mix(a.volume, b.volume),
            trade_value: mix(a.trade_value, b.trade_value),
            interpolated: true,
        }
    }
}

#[derive(Debug, Deserialize)]
struct BarRecord {
    date: String,
    open: f64,
    high: f64,
    low: f64,
    close: f64,
    volume: f64,
    #[serde(default)]
    trade_value: Option<f64>,
    #[serde(default)]
    interpolated: Option<bool>,
}

/// Parse `date,open,high,low,close,volume[,trade_value]` rows.
///
/// Extra columns are ignored, so an aligned file written by
/// [`write_aligned`] parses back with its `interpolated` flags intact.
pub fn parse_bars<R: Read>(source: R) -> Result<Vec<DailyBar>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let mut bars: Vec<DailyBar> = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| MarketDataError::MalformedRecord {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let rec: BarRecord =
            row.deserialize(Some(&headers))
                .map_err(|e| MarketDataError::MalformedRecord {
                    line,
                    message: e.to_string(),
                })?;
        let date = NaiveDate::parse_from_str(&rec.date, "%Y-%m-%d").map_err(|e| {
            MarketDataError::MalformedRecord {
                line,
                message: format!("bad date {:?}: {e}", rec.date),
            }
        })?;
        let bar = DailyBar {
            date,
            open: rec.open,
            high: rec.high,
            low: rec.low,
            close: rec.close,
            volume: rec.volume,
            trade_value: rec.trade_value.unwrap_or(rec.close * rec.volume),
            interpolated: rec.interpolated.unwrap_or(false),
        };
        bar.check()
            .map_err(|message| MarketDataError::MalformedRecord { line, message })?;
        if let Some(prev) = bars.last() {
            if bar.date <= prev.date {
                return Err(MarketDataError::NonMonotonicDates {
                    previous: prev.date,
                    date: bar.date,
                });
            }
        }
        bars.push(bar);
    }
    Ok(bars)
}

/// Produce one bar per calendar day of `span`, filling gaps linearly.
///
/// Trading-day bars are copied unchanged. Runs of more than
/// [`MAX_GAP_DAYS`] missing days are rejected as corrupt input.
pub fn align_calendar(bars: &[DailyBar], span: DateSpan) -> Result<Vec<DailyBar>> {
    let (first, last) = match (bars.first(), bars.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(MarketDataError::TooFewBars(0)),
    };
    if span.start < first.date {
        return Err(MarketDataError::UncoveredEdge(span.start));
    }
    if span.end > last.date {
        return Err(MarketDataError::UncoveredEdge(span.end));
    }
    for w in bars.windows(2) {
        if w[1].date <= w[0].date {
            return Err(MarketDataError::NonMonotonicDates {
                previous: w[0].date,
                date: w[1].date,
            });
        }
    }
    if let Some(b) = bars.iter().find(|b| !span.contains(b.date)) {
        return Err(MarketDataError::BarOutsideSpan(b.date));
    }

    let mut out = Vec::with_capacity(span.len());
    out.push(first.clone());
    for w in bars.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let steps = (b.date - a.date).num_days();
        let missing = steps - 1;
        if missing > MAX_GAP_DAYS {
            return Err(MarketDataError::GapTooWide {
                after: a.date,
                missing,
            });
        }
        for k in 1..steps {
            out.push(DailyBar::lerp(a, b, a.date + Duration::days(k), k, steps));
        }
        out.push(b.clone());
    }
    Ok(out)
}

/// Close-to-close returns on a bar sequence, keyed by date.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnSeries {
    dates: Vec<NaiveDate>,
    values: Vec<f64>,
    trading: Vec<bool>,
}

impl ReturnSeries {
    pub fn from_parts(dates: Vec<NaiveDate>, values: Vec<f64>, trading: Vec<bool>) -> Self {
        assert_eq!(dates.len(), values.len());
        assert_eq!(dates.len(), trading.len());
        Self {
            dates,
            values,
            trading,
        }
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn trading_flags(&self) -> &[bool] {
        &self.trading
    }

    fn position(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    pub fn get(&self, date: NaiveDate) -> Option<f64> {
        self.position(date).map(|i| self.values[i])
    }

    pub fn is_trading_day(&self, date: NaiveDate) -> Option<bool> {
        self.position(date).map(|i| self.trading[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (NaiveDate, f64, bool)> + '_ {
        self.dates
            .iter()
            .zip(&self.values)
            .zip(&self.trading)
            .map(|((d, v), t)| (*d, *v, *t))
    }
}

/// `R_t = (close_t - close_{t-1}) / close_{t-1}` for every bar after the first.
pub fn compute_returns(bars: &[DailyBar]) -> Result<ReturnSeries> {
    if bars.len() < 2 {
        return Err(MarketDataError::TooFewBars(bars.len()));
    }
    let n = bars.len() - 1;
    let mut dates = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut trading = Vec::with_capacity(n);
    for w in bars.windows(2) {
        let (prev, cur) = (&w[0], &w[1]);
        if prev.close == 0.0 {
            return Err(MarketDataError::ZeroPrice(prev.date));
        }
        dates.push(cur.date);
        values.push((cur.close - prev.close) / prev.close);
        trading.push(!cur.interpolated);
    }
    Ok(ReturnSeries {
        dates,
        values,
        trading,
    })
}

/// Write aligned bars with `interpolated` and `return` columns appended.
/// The first row's return is left empty.
pub fn write_aligned<W: Write>(bars: &[DailyBar], returns: &ReturnSeries, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "date",
        "open",
        "high",
        "low",
        "close",
        "volume",
        "trade_value",
        "interpolated",
        "return",
    ])?;
    for bar in bars {
        let ret = returns.get(bar.date).map(|r| r.to_string()).unwrap_or_default();
        w.write_record([
            bar.date.to_string(),
            bar.open.to_string(),
            bar.high.to_string(),
            bar.low.to_string(),
            bar.close.to_string(),
            bar.volume.to_string(),
            bar.trade_value.to_string(),
            bar.interpolated.to_string(),
            ret,
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Write raw bars in the ingestion format.
pub fn write_bars<W: Write>(bars: &[DailyBar], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record([
        "date",
        "open",
        "high",
        "low",
        "close",
        "volume",
        "trade_value",
    ])?;
    for bar in bars {
        w.write_record([
            bar.date.to_string(),
            bar.open.to_string(),
            bar.high.to_string(),
            bar.low.to_string(),
            bar.close.to_string(),
            bar.volume.to_string(),
            bar.trade_value.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
    }

    fn bar(date: &str, close: f64) -> DailyBar {
        DailyBar {
            date: d(date),
            open: close,
            high: close + 1.0,
            low: close - 1.0,
            close,
            volume: 1000.0,
            trade_value: close * 1000.0,
            interpolated: false,
        }
    }

    #[test]
    fn parses_a_row_and_defaults_trade_value() {
        let csv = "date,open,high,low,close,volume\n\
                   2020-03-24,228.9,229.4,222.3,228.0,1e8\n\
                   2020-03-25,100,100,100,100,50\n";
        let bars = parse_bars(csv.as_bytes()).unwrap();
        assert_eq!(bars.len(), 2);
        assert_eq!(bars[0].open, 228.9);
        assert_eq!(bars[0].volume, 1e8);
        assert!(!bars[0].interpolated);
        assert_eq!(bars[1].trade_value, 5000.0);
    }

    #[test]
    fn explicit_trade_value_is_kept() {
        let csv = "date,open,high,low,close,volume,trade_value\n2020-03-24,1,2,1,2,10,17\n";
        assert_eq!(parse_bars(csv.as_bytes()).unwrap()[0].trade_value, 17.0);
    }

    #[test]
    fn duplicate_dates_rejected() {
        let csv = "date,open,high,low,close,volume\n\
                   2020-03-24,1,1,1,1,1\n2020-03-24,1,1,1,1,1\n";
        assert!(matches!(
            parse_bars(csv.as_bytes()),
            Err(MarketDataError::NonMonotonicDates { .. })
        ));
    }

    #[test]
    fn malformed_row_reports_line() {
        let csv = "date,open,high,low,close,volume\n\
                   2020-03-24,1,1,1,1,1\n2020-03-25,1,x,1,1,1\n";
        match parse_bars(csv.as_bytes()) {
            Err(MarketDataError::MalformedRecord { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let csv = "date,open,high,low,close,volume\n2020-03-24,1,1,5,1,1\n";
        assert!(matches!(
            parse_bars(csv.as_bytes()),
            Err(MarketDataError::MalformedRecord { line: 2, .. })
        ));
    }

    #[test]
    fn weekend_is_interpolated_at_thirds() {
        let bars = vec![bar("2020-03-27", 100.0), bar("2020-03-30", 106.0)];
        let out = align_calendar(&bars, DateSpan::new(d("2020-03-27"), d("2020-03-30"))).unwrap();
        assert_eq!(out.len(), 4);
        assert_eq!(out[1].close, 102.0);
        assert_eq!(out[2].close, 104.0);
        assert!(out[1].interpolated && out[2].interpolated);
        assert_eq!(out[0], bars[0]);
        assert_eq!(out[3], bars[1]);
    }

    #[test]
    fn full_span_is_identity() {
        let bars = vec![
            bar("2020-03-24", 1.0),
            bar("2020-03-25", 2.0),
            bar("2020-03-26", 3.0),
        ];
        let out = align_calendar(&bars, DateSpan::new(d("2020-03-24"), d("2020-03-26"))).unwrap();
        assert_eq!(out, bars);
    }

    #[test]
    fn gap_limits() {
        let ok = vec![bar("2020-03-01", 1.0), bar("2020-03-06", 2.0)];
        assert_eq!(
            align_calendar(&ok, DateSpan::new(d("2020-03-01"), d("2020-03-06")))
                .unwrap()
                .len(),
            6
        );
        let bad = vec![bar("2020-03-01", 1.0), bar("2020-03-08", 2.0)];
        assert!(matches!(
            align_calendar(&bad, DateSpan::new(d("2020-03-01"), d("2020-03-08"))),
            Err(MarketDataError::GapTooWide { missing: 6, .. })
        ));
        let five = vec![bar("2020-03-01", 1.0), bar("2020-03-07", 2.0)];
        assert!(matches!(
            align_calendar(&five, DateSpan::new(d("2020-03-01"), d("2020-03-07"))),
            Err(MarketDataError::GapTooWide { missing: 5, .. })
        ));
    }

    #[test]
    fn span_edges_checked() {
        let bars = vec![bar("2020-03-02", 1.0), bar("2020-03-03", 2.0)];
        assert!(matches!(
            align_calendar(&bars, DateSpan::new(d("2020-03-01"), d("2020-03-03"))),
            Err(MarketDataError::UncoveredEdge(_))
        ));
        assert!(matches!(
            align_calendar(&bars, DateSpan::new(d("2020-03-02"), d("2020-03-02"))),
            Err(MarketDataError::BarOutsideSpan(_))
        ));
    }

    #[test]
    fn returns_examples() {
        let r = compute_returns(&[bar("2020-03-24", 100.0), bar("2020-03-25", 101.0)]).unwrap();
        assert_eq!(r.len(), 1);
        assert!((r.values()[0] - 0.01).abs() < 1e-15);

        let flat = compute_returns(&[
            bar("2020-03-24", 100.0),
            bar("2020-03-25", 100.0),
            bar("2020-03-26", 100.0),
        ])
        .unwrap();
        assert!(flat.values().iter().all(|&v| v == 0.0));

        let zero = compute_returns(&[bar("2020-03-24", 0.0), bar("2020-03-25", 1.0)]);
        assert!(matches!(zero, Err(MarketDataError::ZeroPrice(_))));
    }

    #[test]
    fn trading_flag_follows_interpolation() {
        let bars = vec![bar("2020-03-27", 100.0), bar("2020-03-30", 106.0)];
        let aligned =
            align_calendar(&bars, DateSpan::new(d("2020-03-27"), d("2020-03-30"))).unwrap();
        let r = compute_returns(&aligned).unwrap();
        assert_eq!(r.trading_flags(), &[false, false, true]);
    }

    #[test]
    fn aligned_file_roundtrips() {
        let bars = vec![bar("2020-03-27", 100.0), bar("2020-03-30", 106.0)];
        let aligned =
            align_calendar(&bars, DateSpan::new(d("2020-03-27"), d("2020-03-30"))).unwrap();
        let r = compute_returns(&aligned).unwrap();
        let mut buf = Vec::new();
        write_aligned(&aligned, &r, &mut buf).unwrap();
        let back = parse_bars(buf.as_slice()).unwrap();
        assert_eq!(back, aligned);
    }
}
