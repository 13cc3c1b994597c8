//! Tweet labeling seam, session bucketing, daily counts and the sentiment score.
//!
//! Labels normally arrive precomputed by an external financial-language
//! classifier. [`SentimentLabeler`] is where such a model plugs in; the crate
//! ships the identity labeler plus a two-word lexicon used in tests.

use crate::market_data::DateSpan;
use chrono::{DateTime, FixedOffset, NaiveDate, NaiveTime, Timelike};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SentimentError {
    #[error("tweet at {0} has text but no label and the labeler cannot classify text")]
    UnlabeledText(DateTime<FixedOffset>),
    #[error("line {line}: {message}")]
    MalformedRecord { line: u64, message: String },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SentimentError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SentimentLabel {
    Positive,
    Negative,
    Neutral,
}

impl FromStr for SentimentLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" => Ok(SentimentLabel::Positive),
            "negative" => Ok(SentimentLabel::Negative),
            "neutral" => Ok(SentimentLabel::Neutral),
            other => Err(format!("unknown sentiment label {other:?}")),
        }
    }
}

impl fmt::Display for SentimentLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SentimentLabel::Positive => "positive",
            SentimentLabel::Negative => "negative",
            SentimentLabel::Neutral => "neutral",
        })
    }
}

/// Trading-day session a tweet falls into, in exchange-local time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Session {
    PreMarket,
    IntraMarket,
    PostMarket,
    FullDay,
}

impl Session {
    pub const ALL: [Session; 4] = [
        Session::PreMarket,
        Session::IntraMarket,
        Session::PostMarket,
        Session::FullDay,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Session::PreMarket => "pre",
            Session::IntraMarket => "intra",
            Session::PostMarket => "post",
            Session::FullDay => "full",
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }
}

impl FromStr for Session {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "pre" => Ok(Session::PreMarket),
            "intra" => Ok(Session::IntraMarket),
            "post" => Ok(Session::PostMarket),
            "full" => Ok(Session::FullDay),
            other => Err(format!("unknown session {other:?}")),
        }
    }
}

impl fmt::Display for Session {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TweetRecord {
    pub timestamp: DateTime<FixedOffset>,
    pub label: Option<SentimentLabel>,
    pub text: Option<String>,
}

/// A tweet guaranteed to carry a label; produced by [`label_tweets`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledTweet {
    pub timestamp: DateTime<FixedOffset>,
    pub label: SentimentLabel,
}

/// Classifies tweet text. Implement this to plug in a real sentiment model.
pub trait SentimentLabeler: Sync {
    fn classify(&self, tweet: &TweetRecord, text: &str) -> Result<SentimentLabel>;
}

/// Accepts existing labels and refuses to classify text.
#[derive(Debug, Default, Clone, Copy)]
pub struct IdentityLabeler;

impl SentimentLabeler for IdentityLabeler {
    fn classify(&self, tweet: &TweetRecord, _text: &str) -> Result<SentimentLabel> {
        Err(SentimentError::UnlabeledText(tweet.timestamp))
    }
}

/// Word-list labeler: `bullish` → positive, `bearish` → negative, else neutral.
/// Positive words win when both occur. Meant for tests and demos only.
#[derive(Debug, Default, Clone, Copy)]
pub struct LexiconLabeler;

impl SentimentLabeler for LexiconLabeler {
    fn classify(&self, _tweet: &TweetRecord, text: &str) -> Result<SentimentLabel> {
        let mut words = text
            .split(|c: char| !c.is_alphanumeric())
            .map(|w| w.to_ascii_lowercase());
        let (mut pos, mut neg) = (false, false);
        for w in words.by_ref() {
            pos |= w == "bullish";
            neg |= w == "bearish";
        }
        Ok(if pos {
            SentimentLabel::Positive
        } else if neg {
            SentimentLabel::Negative
        } else {
            SentimentLabel::Neutral
        })
    }
}

/// Give every tweet a label. Tweets that already carry one pass through.
pub fn label_tweets(
    tweets: &[TweetRecord],
    labeler: &dyn SentimentLabeler,
) -> Result<Vec<LabeledTweet>> {
    tweets
        .iter()
        .map(|t| {
            let label = match (t.label, t.text.as_deref()) {
                (Some(l), _) => l,
                (None, Some(text)) => labeler.classify(t, text)?,
                (None, None) => return Err(SentimentError::UnlabeledText(t.timestamp)),
            };
            Ok(LabeledTweet {
                timestamp: t.timestamp,
                label,
            })
        })
        .collect()
}

/// Session of an exchange-local timestamp: pre `[00:00, 09:30)`,
/// intra `[09:30, 16:00)`, post `[16:00, 24:00)`.
pub fn bucket_session(timestamp: &DateTime<FixedOffset>) -> Session {
    bucket_time(timestamp.time())
}

pub(crate) fn bucket_time(t: NaiveTime) -> Session {
    let minutes = t.hour() * 60 + t.minute();
    if minutes < 9 * 60 + 30 {
        Session::PreMarket
    } else if minutes < 16 * 60 {
        Session::IntraMarket
    } else {
        Session::PostMarket
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCounts {
    pub date: NaiveDate,
    pub session: Session,
    pub positive: u64,
    pub negative: u64,
    pub neutral: u64,
}

impl SessionCounts {
    pub fn zero(date: NaiveDate, session: Session) -> Self {
        Self {
            date,
            session,
            positive: 0,
            negative: 0,
            neutral: 0,
        }
    }

    pub fn total(&self) -> u64 {
        self.positive + self.negative + self.neutral
    }

    fn add(&mut self, label: SentimentLabel) {
        match label {
            SentimentLabel::Positive => self.positive += 1,
            SentimentLabel::Negative => self.negative += 1,
            SentimentLabel::Neutral => self.neutral += 1,
        }
    }
}

/// Per-day, per-session counts over `span`, ordered by date then session
/// (pre, intra, post, full). Tweets dated outside the span are ignored.
pub fn daily_counts(tweets: &[LabeledTweet], span: DateSpan) -> Vec<SessionCounts> {
    let mut out: Vec<SessionCounts> = span
        .days()
        .flat_map(|d| Session::ALL.map(|s| SessionCounts::zero(d, s)))
        .collect();
    for t in tweets {
        let date = t.timestamp.date_naive();
        if !span.contains(date) {
            continue;
        }
        let base = (date - span.start).num_days() as usize * Session::ALL.len();
        out[base + bucket_session(&t.timestamp).index()].add(t.label);
        out[base + Session::FullDay.index()].add(t.label);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SentimentIndex {
    pub date: NaiveDate,
    pub session: Session,
    pub score: f64,
    /// True when the day had no tweets and the score was set to zero.
    pub imputed: bool,
}

/// `S = (P - N) / T`, with zero-tweet days imputed as `S = 0`.
pub fn sentiment_score(counts: &SessionCounts) -> SentimentIndex {
    let total = counts.total();
    let (score, imputed) = if total == 0 {
        (0.0, true)
    } else {
        (
            (counts.positive as f64 - counts.negative as f64) / total as f64,
            false,
        )
    };
    SentimentIndex {
        date: counts.date,
        session: counts.session,
        score,
        imputed,
    }
}

#[derive(Debug, Deserialize)]
struct TweetRow {
    timestamp: String,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    text: Option<String>,
}

fn tweet_from_row(row: TweetRow, line: u64) -> Result<TweetRecord> {
    let bad = |message: String| SentimentError::MalformedRecord { line, message };
    let timestamp = DateTime::parse_from_rfc3339(row.timestamp.trim())
        .map_err(|e| bad(format!("bad timestamp {:?}: {e}", row.timestamp)))?;
    let label = match row.label.as_deref().map(str::trim) {
        None | Some("") => None,
        Some(s) => Some(s.parse::<SentimentLabel>().map_err(bad)?),
    };
    let text = row.text.filter(|t| !t.is_empty());
    if label.is_none() && text.is_none() {
        return Err(bad("tweet has neither label nor text".into()));
    }
    Ok(TweetRecord {
        timestamp,
        label,
        text,
    })
}

/// Parse delimited `timestamp,label[,text]` rows; RFC 3339 timestamps.
pub fn parse_tweets_csv<R: Read>(source: R) -> Result<Vec<TweetRecord>> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(source);
    let headers = reader.headers()?.clone();
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| SentimentError::MalformedRecord {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let parsed: TweetRow =
            row.deserialize(Some(&headers))
                .map_err(|e| SentimentError::MalformedRecord {
                    line,
                    message: e.to_string(),
                })?;
        out.push(tweet_from_row(parsed, line)?);
    }
    Ok(out)
}

/// Parse one JSON object per line with `timestamp`, `label` and/or `text`.
pub fn parse_tweets_jsonl<R: Read>(source: R) -> Result<Vec<TweetRecord>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(source).lines().enumerate() {
        let line_no = i as u64 + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: TweetRow =
            serde_json::from_str(&line).map_err(|e| SentimentError::MalformedRecord {
                line: line_no,
                message: e.to_string(),
            })?;
        out.push(tweet_from_row(row, line_no)?);
    }
    Ok(out)
}

/// Write tweets as `timestamp,label` rows (labels only, no text).
pub fn write_labeled_tweets<W: Write>(tweets: &[LabeledTweet], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["timestamp", "label"])?;
    for t in tweets {
        w.write_record([t.timestamp.to_rfc3339(), t.label.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Write the `date,session,P,N,n,T,S,imputed` table.
pub fn write_counts<W: Write>(counts: &[SessionCounts], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["date", "session", "P", "N", "n", "T", "S", "imputed"])?;
    for c in counts {
        let idx = sentiment_score(c);
        w.write_record([
            c.date.to_string(),
            c.session.to_string(),
            c.positive.to_string(),
            c.negative.to_string(),
            c.neutral.to_string(),
            c.total().to_string(),
            idx.score.to_string(),
            idx.imputed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Deserialize)]
struct CountRow {
    date: String,
    session: String,
    #[serde(rename = "P")]
    positive: u64,
    #[serde(rename = "N")]
    negative: u64,
    #[serde(rename = "n")]
    neutral: u64,
    #[serde(rename = "T")]
    total: u64,
}

/// Read a counts table written by [`write_counts`]; the S column is recomputed.
pub fn read_counts<R: Read>(source: R) -> Result<Vec<SessionCounts>> {
    let mut reader = csv::Reader::from_reader(source);
    let headers = reader.headers()?.clone();
    let mut out = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| SentimentError::MalformedRecord { line, message };
        let r: CountRow = row
            .deserialize(Some(&headers))
            .map_err(|e| bad(e.to_string()))?;
        let date = NaiveDate::parse_from_str(&r.date, "%Y-%m-%d").map_err(|e| bad(e.to_string()))?;
        let session = r.session.parse::<Session>().map_err(bad)?;
        let c = SessionCounts {
            date,
            session,
            positive: r.positive,
            negative: r.negative,
            neutral: r.neutral,
        };
        if c.total() != r.total {
            return Err(bad(format!("T = {} but P + N + n = {}", r.total, c.total())));
        }
        out.push(c);
    }
    Ok(out)
}

/// Index counts by `(date, session)`.
pub fn counts_by_key(counts: &[SessionCounts]) -> HashMap<(NaiveDate, Session), SessionCounts> {
    counts.iter().map(|c| ((c.date, c.session), *c)).collect()
}
