//! Named lagged regressors and aligned design matrices.
//!
//! Lags count calendar days on the interpolated grid, so lag 7 is the same
//! weekday one week earlier. Financial features are read "as of" the most
//! recent real trading bar at or before `t - lag`: an interpolated weekend
//! value depends on the following Monday's close and would leak the target.
//! Labels follow the same rule: a row's label counts as known only from the
//! first trading day on or after its date (see [`FeatureMatrix::realized`]).

use crate::label::Label;
use crate::market_data::{self, DailyBar, DateSpan, ReturnSeries};
use crate::sentiment::{sentiment_score, Session, SessionCounts};
use chrono::{Duration, NaiveDate};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("no complete row: the span is shorter than the largest lag")]
    SpanTooShort,
    #[error("split leaves an empty side ({train} train rows, {test} test rows)")]
    DegenerateSplit { train: usize, test: usize },
    #[error("train fraction must lie strictly between 0 and 1, got {0}")]
    BadFraction(f64),
    #[error("invalid feature: {0}")]
    InvalidSpec(String),
    #[error("dataset grid is not contiguous at {0}")]
    NonContiguousGrid(NaiveDate),
    #[error(transparent)]
    MarketData(#[from] market_data::MarketDataError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, FeatureError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeatureKind {
    Return,
    SentimentIndex,
    NegativeCount,
    Open,
    Close,
    High,
    Low,
    Volume,
    TradeValue,
}

impl FeatureKind {
    pub fn is_sentiment(self) -> bool {
        matches!(self, FeatureKind::SentimentIndex | FeatureKind::NegativeCount)
    }

    fn stem(self) -> &'static str {
        match self {
            FeatureKind::Return => "R",
            FeatureKind::SentimentIndex => "S",
            FeatureKind::NegativeCount => "N",
            FeatureKind::Open => "Open",
            FeatureKind::Close => "Close",
            FeatureKind::High => "High",
            FeatureKind::Low => "Low",
            FeatureKind::Volume => "Volume",
            FeatureKind::TradeValue => "TradeValue",
        }
    }
}

/// A lagged regressor, e.g. `S_pre[t-0]`, `N[t-7]`, `R[t-1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FeatureSpec {
    kind: FeatureKind,
    lag: u32,
    session: Option<Session>,
}

impl FeatureSpec {
    pub fn new(kind: FeatureKind, lag: u32, session: Option<Session>) -> Result<Self> {
        let spec = Self { kind, lag, session };
        if kind.is_sentiment() != session.is_some() {
            return Err(FeatureError::InvalidSpec(format!(
                "{kind:?} {} a session",
                if kind.is_sentiment() { "requires" } else { "takes no" }
            )));
        }
        let same_day_ok = kind == FeatureKind::SentimentIndex && session == Some(Session::PreMarket);
        if lag == 0 && !same_day_ok {
            return Err(FeatureError::InvalidSpec(format!(
                "{} would use same-day data; only pre-market sentiment may have lag 0",
                spec.name()
            )));
        }
        Ok(spec)
    }

    pub fn financial(kind: FeatureKind, lag: u32) -> Result<Self> {
        Self::new(kind, lag, None)
    }

    pub fn sentiment(session: Session, lag: u32) -> Result<Self> {
        Self::new(FeatureKind::SentimentIndex, lag, Some(session))
    }

    pub fn negative_count(session: Session, lag: u32) -> Result<Self> {
        Self::new(FeatureKind::NegativeCount, lag, Some(session))
    }

    pub fn kind(&self) -> FeatureKind {
        self.kind
    }

    pub fn lag(&self) -> u32 {
        self.lag
    }

    pub fn session(&self) -> Option<Session> {
        self.session
    }

    /// Canonical name; the stable identifier of a feature across runs.
    pub fn name(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for FeatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.kind.stem())?;
        match self.session {
            Some(Session::FullDay) | None => {}
            Some(s) => write!(f, "_{}", s.as_str())?,
        }
        write!(f, "[t-{}]", self.lag)
    }
}

impl FromStr for FeatureSpec {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || FeatureError::InvalidSpec(format!("cannot parse feature name {s:?}"));
        let s = s.trim();
        let (head, rest) = s.split_once('[').ok_or_else(bad)?;
        let lag: u32 = rest
            .strip_prefix("t-")
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(bad)?
            .parse()
            .map_err(|_| bad())?;
        let (stem, session) = match head.split_once('_') {
            Some((stem, sess)) => (stem, Some(sess.parse::<Session>().map_err(|_| bad())?)),
            None => (head, None),
        };
        let kind = match stem {
            "R" => FeatureKind::Return,
            "S" => FeatureKind::SentimentIndex,
            "N" => FeatureKind::NegativeCount,
            "Open" => FeatureKind::Open,
            "Close" => FeatureKind::Close,
            "High" => FeatureKind::High,
            "Low" => FeatureKind::Low,
            "Volume" => FeatureKind::Volume,
            "TradeValue" => FeatureKind::TradeValue,
            _ => return Err(bad()),
        };
        let session = if kind.is_sentiment() {
            Some(session.unwrap_or(Session::FullDay))
        } else if session.is_some() {
            return Err(bad());
        } else {
            None
        };
        FeatureSpec::new(kind, lag, session)
    }
}

impl TryFrom<String> for FeatureSpec {
    type Error = FeatureError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<FeatureSpec> for String {
    fn from(f: FeatureSpec) -> String {
        f.name()
    }
}

/// The three reference feature sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    Literature,
    BoRfe2,
    BoRfe5,
}

/// Ordered feature list of a reference strategy.
pub fn canonical_set(strategy: Strategy) -> Vec<FeatureSpec> {
    let names: &[&str] = match strategy {
        Strategy::Literature => &[
            "R[t-1]",
            "S_pre[t-0]",
            "S_intra[t-1]",
            "S_post[t-1]",
            "Open[t-1]",
            "Close[t-1]",
            "High[t-1]",
            "Low[t-1]",
            "Volume[t-1]",
            "TradeValue[t-1]",
        ],
        Strategy::BoRfe2 => &["R[t-1]", "S_pre[t-0]"],
        Strategy::BoRfe5 => &[
            "R[t-1]",
            "S_pre[t-0]",
            "S_intra[t-7]",
            "S_post[t-7]",
            "N[t-7]",
        ],
    };
    names
        .iter()
        .map(|n| n.parse().expect("canonical names parse"))
        .collect()
}

/// Aligned market and sentiment series on one contiguous daily grid.
#[derive(Debug, Clone)]
pub struct Dataset {
    bars: Vec<DailyBar>,
    returns: ReturnSeries,
    /// `counts[day][session]`, `None` where no count record exists.
    counts: Vec<[Option<SessionCounts>; 4]>,
    /// Index of the latest non-interpolated bar at or before each day.
    last_trading: Vec<Option<usize>>,
    /// Index of the first non-interpolated bar at or after each day.
    next_trading: Vec<Option<usize>>,
}

impl Dataset {
    /// Build from calendar-aligned bars and session counts.
    pub fn new(bars: Vec<DailyBar>, counts: &[SessionCounts]) -> Result<Self> {
        let returns = market_data::compute_returns(&bars)?;
        for w in bars.windows(2) {
            if w[1].date != w[0].date + Duration::days(1) {
                return Err(FeatureError::NonContiguousGrid(w[0].date));
            }
        }
        let start = bars[0].date;
        let mut by_day = vec![[None; 4]; bars.len()];
        for c in counts {
            let off = (c.date - start).num_days();
            if off >= 0 && (off as usize) < bars.len() {
                by_day[off as usize][c.session.index()] = Some(*c);
            }
        }
        let mut last_trading = Vec::with_capacity(bars.len());
        let mut last = None;
        for (i, b) in bars.iter().enumerate() {
            if !b.interpolated {
                last = Some(i);
            }
            last_trading.push(last);
        }
        let mut next_trading = vec![None; bars.len()];
        let mut next = None;
        for (i, b) in bars.iter().enumerate().rev() {
            if !b.interpolated {
                next = Some(i);
            }
            next_trading[i] = next;
        }
        Ok(Self {
            bars,
            returns,
            counts: by_day,
            last_trading,
            next_trading,
        })
    }

    pub fn bars(&self) -> &[DailyBar] {
        &self.bars
    }

    pub fn returns(&self) -> &ReturnSeries {
        &self.returns
    }

    pub fn span(&self) -> DateSpan {
        DateSpan::new(self.bars[0].date, self.bars[self.bars.len() - 1].date)
    }

    fn offset(&self, date: NaiveDate) -> Option<usize> {
        let off = (date - self.bars[0].date).num_days();
        (off >= 0 && (off as usize) < self.bars.len()).then_some(off as usize)
    }

    pub fn counts(&self, date: NaiveDate, session: Session) -> Option<SessionCounts> {
        self.offset(date).and_then(|i| self.counts[i][session.index()])
    }

    /// Dates that carry a return (every grid day except the first).
    pub fn label_dates(&self) -> &[NaiveDate] {
        self.returns.dates()
    }

    /// Date from which the label of `date` is known: the first trading day on
    /// or after it.
    pub fn realized_on(&self, date: NaiveDate) -> Option<NaiveDate> {
        self.offset(date)
            .and_then(|i| self.next_trading[i])
            .map(|j| self.bars[j].date)
    }

    fn value(&self, spec: &FeatureSpec, t: usize) -> Option<f64> {
        let i = t.checked_sub(spec.lag as usize)?;
        match spec.kind {
            FeatureKind::SentimentIndex => {
                let c = self.counts[i][spec.session?.index()]?;
                Some(sentiment_score(&c).score)
            }
            FeatureKind::NegativeCount => {
                let c = self.counts[i][spec.session?.index()]?;
                Some(c.negative as f64)
            }
            FeatureKind::Return => {
                let j = self.last_trading[i]?;
                // returns[k] belongs to bars[k + 1]
                j.checked_sub(1).map(|k| self.returns.values()[k])
            }
            kind => {
                let bar = &self.bars[self.last_trading[i]?];
                Some(match kind {
                    FeatureKind::Open => bar.open,
                    FeatureKind::Close => bar.close,
                    FeatureKind::High => bar.high,
                    FeatureKind::Low => bar.low,
                    FeatureKind::Volume => bar.volume,
                    FeatureKind::TradeValue => bar.trade_value,
                    _ => unreachable!(),
                })
            }
        }
    }
}

/// Design matrix with return-sign labels, one row per grid day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    specs: Vec<FeatureSpec>,
    dates: Vec<NaiveDate>,
    /// Row-major, `dates.len() * specs.len()` cells.
    values: Vec<f64>,
    labels: Vec<Label>,
    returns: Vec<f64>,
    trading: Vec<bool>,
    realized: Vec<NaiveDate>,
}

/// One row's metadata, for constructing matrices by hand.
#[derive(Debug, Clone, PartialEq)]
pub struct RowInput {
    pub date: NaiveDate,
    pub values: Vec<f64>,
    pub ret: f64,
    pub trading: bool,
    pub realized: NaiveDate,
}

impl FeatureMatrix {
    /// Assemble a matrix from explicit rows. Labels are `sign(ret)`.
    pub fn from_rows(specs: Vec<FeatureSpec>, rows: Vec<RowInput>) -> Self {
        let mut m = FeatureMatrix {
            specs,
            dates: Vec::with_capacity(rows.len()),
            values: Vec::new(),
            labels: Vec::with_capacity(rows.len()),
            returns: Vec::with_capacity(rows.len()),
            trading: Vec::with_capacity(rows.len()),
            realized: Vec::with_capacity(rows.len()),
        };
        for r in rows {
            assert_eq!(r.values.len(), m.specs.len(), "row width mismatch");
            if let Some(last) = m.dates.last() {
                assert!(r.date > *last, "rows must be in date order");
            }
            m.dates.push(r.date);
            m.values.extend_from_slice(&r.values);
            m.labels.push(Label::from_return(r.ret));
            m.returns.push(r.ret);
            m.trading.push(r.trading);
            m.realized.push(r.realized);
        }
        m
    }

    pub fn specs(&self) -> &[FeatureSpec] {
        &self.specs
    }

    pub fn feature_names(&self) -> Vec<String> {
        self.specs.iter().map(FeatureSpec::name).collect()
    }

    pub fn n_rows(&self) -> usize {
        self.dates.len()
    }

    pub fn n_cols(&self) -> usize {
        self.specs.len()
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn returns(&self) -> &[f64] {
        &self.returns
    }

    pub fn trading(&self) -> &[bool] {
        &self.trading
    }

    /// First date on which each row's label is observable.
    pub fn realized(&self) -> &[NaiveDate] {
        &self.realized
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.specs.len();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn position(&self, date: NaiveDate) -> Option<usize> {
        self.dates.binary_search(&date).ok()
    }

    /// Feature values of the given rows as an `rows × cols` array.
    pub fn design(&self, rows: &[usize]) -> ndarray::Array2<f64> {
        let p = self.n_cols();
        ndarray::Array2::from_shape_fn((rows.len(), p), |(r, c)| self.row(rows[r])[c])
    }

    pub fn labels_of(&self, rows: &[usize]) -> Vec<Label> {
        rows.iter().map(|&r| self.labels[r]).collect()
    }

    /// Keep only the given columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> FeatureMatrix {
        let p = self.n_cols();
        let mut values = Vec::with_capacity(self.n_rows() * cols.len());
        for i in 0..self.n_rows() {
            values.extend(cols.iter().map(|&c| self.values[i * p + c]));
        }
        FeatureMatrix {
            specs: cols.iter().map(|&c| self.specs[c]).collect(),
            values,
            ..self.clone()
        }
    }

    /// Keep the named columns, in the given order.
    pub fn select_features(&self, specs: &[FeatureSpec]) -> Result<FeatureMatrix> {
        let cols = specs
            .iter()
            .map(|s| {
                self.specs.iter().position(|x| x == s).ok_or_else(|| {
                    FeatureError::InvalidSpec(format!("{s} is not a column of this matrix"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_columns(&cols))
    }

    /// Contiguous row range `[from, to)`.
    pub fn slice_rows(&self, from: usize, to: usize) -> FeatureMatrix {
        let p = self.n_cols();
        FeatureMatrix {
            specs: self.specs.clone(),
            dates: self.dates[from..to].to_vec(),
            values: self.values[from * p..to * p].to_vec(),
            labels: self.labels[from..to].to_vec(),
            returns: self.returns[from..to].to_vec(),
            trading: self.trading[from..to].to_vec(),
            realized: self.realized[from..to].to_vec(),
        }
    }

    /// Rows dated at or after `date` go to the second half.
    pub fn split_at_date(&self, date: NaiveDate) -> (FeatureMatrix, FeatureMatrix) {
        let k = self.dates.partition_point(|d| *d < date);
        (self.slice_rows(0, k), self.slice_rows(k, self.n_rows()))
    }

    /// Header of canonical names plus `label`.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        let mut header = vec!["date".to_string()];
        header.extend(self.feature_names());
        header.push("label".into());
        w.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut rec = vec![self.dates[i].to_string()];
            rec.extend(self.row(i).iter().map(f64::to_string));
            rec.push(self.labels[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Build the design matrix for `specs` over the days of `span`.
///
/// Row `t` holds each spec's value at `t - lag`; rows with any unreachable
/// lag, or without a return, are omitted.
pub fn build_matrix(data: &Dataset, specs: &[FeatureSpec], span: DateSpan) -> Result<FeatureMatrix> {
    let mut rows = Vec::new();
    for date in span.days() {
        let Some(t) = data.offset(date) else { continue };
        let Some(ret) = t.checked_sub(1).map(|k| data.returns.values()[k]) else {
            continue;
        };
        let Some(realized) = data.realized_on(date) else {
            continue;
        };
        let values: Option<Vec<f64>> = specs.iter().map(|s| data.value(s, t)).collect();
        let Some(values) = values else { continue };
        rows.push(RowInput {
            date,
            values,
            ret,
            trading: !data.bars[t].interpolated,
            realized,
        });
    }
    if rows.is_empty() {
        return Err(FeatureError::SpanTooShort);
    }
    Ok(FeatureMatrix::from_rows(specs.to_vec(), rows))
}

/// Chronological split; the boundary is `floor(rows * train_fraction)`.
pub fn split(matrix: &FeatureMatrix, train_fraction: f64) -> Result<(FeatureMatrix, FeatureMatrix)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(FeatureError::BadFraction(train_fraction));
    }
    let n = matrix.n_rows();
    let k = split_index(n, train_fraction);
    if k == 0 || k == n {
        return Err(FeatureError::DegenerateSplit {
            train: k,
            test: n - k,
        });
    }
    Ok((matrix.slice_rows(0, k), matrix.slice_rows(k, n)))
}

pub(crate) fn split_index(n: usize, fraction: f64) -> usize {
    // Nudge guards against 100 * 0.84 = 83.99999999999999.
    ((n as f64 * fraction) + 1e-9).floor() as usize
}

/// First test date when the dataset's label-bearing days are split
/// chronologically at `train_fraction`. Every strategy uses this date so all
/// of them share one test span.
pub fn split_date(data: &Dataset, train_fraction: f64) -> Result<NaiveDate> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(FeatureError::BadFraction(train_fraction));
    }
    let dates = data.label_dates();
    let k = split_index(dates.len(), train_fraction);
    if k == 0 || k >= dates.len() {
        return Err(FeatureError::DegenerateSplit {
            train: k,
            test: dates.len().saturating_sub(k),
        });
    }
    Ok(dates[k])
}
