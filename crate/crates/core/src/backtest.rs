//! Moving-window walk-forward evaluation and the fixed-notional trading rule.

use crate::features::{FeatureError, FeatureMatrix, FeatureSpec};
use crate::market_data::{DateSpan, ReturnSeries};
use crate::ml::{classification_metrics, FittedPipeline, Label, MetricsReport, MlError, PipelineConfig};
use crate::rng;
use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use thiserror::Error;

pub const MIN_WINDOW: usize = 10;

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error("{date}: {available} usable history rows, window needs {needed}")]
    InsufficientHistory {
        date: NaiveDate,
        available: usize,
        needed: usize,
    },
    #[error("invalid strategy: {0}")]
    InvalidConfig(String),
    #[error("no return for trading day {0}")]
    MissingReturn(NaiveDate),
    #[error("strategy {0} was evaluated on a different test span")]
    SpanMismatch(String),
    #[error("no trading days in the test span")]
    EmptyTestSpan,
    #[error(transparent)]
    Ml(#[from] MlError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, BacktestError>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyConfig {
    pub name: String,
    pub features: Vec<FeatureSpec>,
    /// Training rows per refit.
    pub window: usize,
    pub pipeline: PipelineConfig,
    pub seed: u64,
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window < MIN_WINDOW {
            return Err(BacktestError::InvalidConfig(format!(
                "{}: window {} is below the minimum of {MIN_WINDOW}",
                self.name, self.window
            )));
        }
        if self.features.is_empty() {
            return Err(BacktestError::InvalidConfig(format!("{}: no features", self.name)));
        }
        Ok(())
    }
}

/// One test-day prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayPrediction {
    pub date: NaiveDate,
    pub y_true: Label,
    pub y_pred: Label,
    pub ret: f64,
    pub trading: bool,
}

/// Rows usable for training a prediction on row `t`: strictly earlier rows
/// whose labels were realized before day `t`. The last `window` are used.
pub fn training_rows(matrix: &FeatureMatrix, t: usize, window: usize) -> Result<Vec<usize>> {
    let date = matrix.dates()[t];
    let eligible: Vec<usize> = (0..t).filter(|&i| matrix.realized()[i] < date).collect();
    if eligible.len() < window {
        return Err(BacktestError::InsufficientHistory {
            date,
            available: eligible.len(),
            needed: window,
        });
    }
    Ok(eligible[eligible.len() - window..].to_vec())
}

/// Seed for the refit that predicts `date`. Depends only on the date, so a
/// truncated history reproduces the same model.
fn day_seed(seed: u64, date: NaiveDate) -> u64 {
    rng::substream(seed, "day", date.num_days_from_ce() as u64)
}

/// Refit on the preceding window and predict each trading day of `span`.
pub fn walk_forward(matrix: &FeatureMatrix, span: DateSpan, config: &StrategyConfig) -> Result<Vec<DayPrediction>> {
    config.validate()?;
    let m = matrix.select_features(&config.features)?;
    let days: Vec<usize> = (0..m.n_rows())
        .filter(|&i| m.trading()[i] && span.contains(m.dates()[i]))
        .collect();
    if days.is_empty() {
        return Err(BacktestError::EmptyTestSpan);
    }
    days.par_iter()
        .map(|&t| {
            let rows = training_rows(&m, t, config.window)?;
            let model = FittedPipeline::fit(
                m.design(&rows).view(),
                &m.labels_of(&rows),
                &config.pipeline,
                day_seed(config.seed, m.dates()[t]),
            )?;
            let y_pred = model.predict(m.design(&[t]).view())?[0];
            Ok(DayPrediction {
                date: m.dates()[t],
                y_true: m.labels()[t],
                y_pred,
                ret: m.returns()[t],
                trading: true,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchScore {
    pub start: NaiveDate,
    pub end: NaiveDate,
    pub days: usize,
    pub f1: f64,
    /// The final batch when it holds fewer than `batch_size` days.
    pub partial: bool,
}

/// F1 over consecutive blocks of `batch_size` trading days.
pub fn batch_f1(predictions: &[DayPrediction], batch_size: usize) -> Vec<BatchScore> {
    assert!(batch_size >= 1, "batch size must be positive");
    let trading: Vec<&DayPrediction> = predictions.iter().filter(|p| p.trading).collect();
    trading
        .chunks(batch_size)
        .map(|c| {
            let t: Vec<Label> = c.iter().map(|p| p.y_true).collect();
            let y: Vec<Label> = c.iter().map(|p| p.y_pred).collect();
            BatchScore {
                start: c[0].date,
                end: c[c.len() - 1].date,
                days: c.len(),
                f1: classification_metrics(&t, &y).expect("non-empty batch").f1,
                partial: c.len() < batch_size,
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PnlPoint {
    pub date: NaiveDate,
    pub pnl: f64,
    pub cum_pnl: f64,
}

/// `notional * R_t * y_pred` on trading days, zero otherwise, with running totals.
pub fn trade_sim(predictions: &[DayPrediction], returns: &ReturnSeries, notional: f64) -> Result<Vec<PnlPoint>> {
    let mut cum = 0.0;
    predictions
        .iter()
        .map(|p| {
            let trading = returns
                .is_trading_day(p.date)
                .ok_or(BacktestError::MissingReturn(p.date))?;
            let pnl = if trading {
                let r = returns.get(p.date).ok_or(BacktestError::MissingReturn(p.date))?;
                notional * r * p.y_pred.as_f64()
            } else {
                0.0
            };
            cum += pnl;
            Ok(PnlPoint {
                date: p.date,
                pnl,
                cum_pnl: cum,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayRecord {
    pub date: NaiveDate,
    pub y_true: Label,
    pub y_pred: Label,
    pub ret: f64,
    pub pnl: f64,
    pub cum_pnl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub strategy: String,
    pub window: usize,
    pub features: Vec<String>,
    pub days: Vec<DayRecord>,
    pub metrics: MetricsReport,
    pub batches: Vec<BatchScore>,
    pub final_pnl: f64,
}

impl BacktestReport {
    pub fn assemble(
        config: &StrategyConfig,
        predictions: &[DayPrediction],
        returns: &ReturnSeries,
        notional: f64,
        batch_size: usize,
    ) -> Result<Self> {
        let trading: Vec<DayPrediction> = predictions.iter().copied().filter(|p| p.trading).collect();
        if trading.is_empty() {
            return Err(BacktestError::EmptyTestSpan);
        }
        let pnl = trade_sim(&trading, returns, notional)?;
        let t: Vec<Label> = trading.iter().map(|p| p.y_true).collect();
        let y: Vec<Label> = trading.iter().map(|p| p.y_pred).collect();
        let days: Vec<DayRecord> = trading
            .iter()
            .zip(&pnl)
            .map(|(p, q)| DayRecord {
                date: p.date,
                y_true: p.y_true,
                y_pred: p.y_pred,
                ret: p.ret,
                pnl: q.pnl,
                cum_pnl: q.cum_pnl,
            })
            .collect();
        Ok(Self {
            strategy: config.name.clone(),
            window: config.window,
            features: config.features.iter().map(FeatureSpec::name).collect(),
            final_pnl: pnl.last().map_or(0.0, |p| p.cum_pnl),
            metrics: classification_metrics(&t, &y)?,
            batches: batch_f1(&trading, batch_size),
            days,
        })
    }

    pub fn dates(&self) -> Vec<NaiveDate> {
        self.days.iter().map(|d| d.date).collect()
    }

    /// `date,y_true,y_pred,return,pnl,cum_pnl` rows.
    pub fn write_predictions<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["date", "y_true", "y_pred", "return", "pnl", "cum_pnl"])?;
        for d in &self.days {
            w.write_record([
                d.date.to_string(),
                d.y_true.to_string(),
                d.y_pred.to_string(),
                d.ret.to_string(),
                d.pnl.to_string(),
                d.cum_pnl.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Run one strategy end to end.
pub fn run_backtest(
    matrix: &FeatureMatrix,
    returns: &ReturnSeries,
    span: DateSpan,
    config: &StrategyConfig,
    notional: f64,
    batch_size: usize,
) -> Result<BacktestReport> {
    let preds = walk_forward(matrix, span, config)?;
    BacktestReport::assemble(config, &preds, returns, notional, batch_size)
}

/// Minimum, quartiles and maximum, with linearly interpolated quartiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

impl BoxStats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            min: v[0],
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q3: quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategySummary {
    pub strategy: String,
    pub metrics: MetricsReport,
    pub batch_f1: Option<BoxStats>,
    pub final_pnl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub dates: Vec<NaiveDate>,
    pub summaries: Vec<StrategySummary>,
    /// One cumulative P&L curve per strategy, aligned with `dates`.
    pub cum_pnl: Vec<Vec<f64>>,
}

/// Side-by-side summary of reports that share one test span.
pub fn compare_strategies(reports: &[BacktestReport]) -> Result<Comparison> {
    let Some(first) = reports.first() else {
        return Ok(Comparison {
            dates: Vec::new(),
            summaries: Vec::new(),
            cum_pnl: Vec::new(),
        });
    };
    let dates = first.dates();
    for r in reports {
        if r.dates() != dates {
            return Err(BacktestError::SpanMismatch(r.strategy.clone()));
        }
    }
    Ok(Comparison {
        summaries: reports
            .iter()
            .map(|r| StrategySummary {
                strategy: r.strategy.clone(),
                metrics: r.metrics,
                batch_f1: BoxStats::of(&r.batches.iter().map(|b| b.f1).collect::<Vec<_>>()),
                final_pnl: r.final_pnl,
            })
            .collect(),
        cum_pnl: reports
            .iter()
            .map(|r| r.days.iter().map(|d| d.cum_pnl).collect())
            .collect(),
        dates,
    })
}

impl Comparison {
    /// One row per strategy: metrics, confusion counts and final P&L.
    pub fn write_table<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record([
            "strategy", "accuracy", "precision", "recall", "f1", "tp", "fp", "tn", "fn", "final_pnl",
        ])?;
        for s in &self.summaries {
            let m = &s.metrics;
            w.write_record([
                s.strategy.clone(),
                m.accuracy.to_string(),
                m.precision.to_string(),
                m.recall.to_string(),
                m.f1.to_string(),
                m.tp.to_string(),
                m.fp.to_string(),
                m.tn.to_string(),
                m.fn_.to_string(),
                s.final_pnl.to_string(),
            ])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// `strategy,min,q1,median,q3,max` rows.
    pub fn write_box_table<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["strategy", "min", "q1", "median", "q3", "max"])?;
        for s in &self.summaries {
            if let Some(b) = s.batch_f1 {
                w.write_record([
                    s.strategy.clone(),
                    b.min.to_string(),
                    b.q1.to_string(),
                    b.median.to_string(),
                    b.q3.to_string(),
                    b.max.to_string(),
                ])?;
            }
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// `date,<strategy>...` cumulative P&L curves.
    pub fn write_cum_pnl<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        let mut header = vec!["date".to_string()];
        header.extend(self.summaries.iter().map(|s| s.strategy.clone()));
        w.write_record(&header)?;
        for (i, d) in self.dates.iter().enumerate() {
            let mut rec = vec![d.to_string()];
            rec.extend(self.cum_pnl.iter().map(|c| c[i].to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}
