use crate::config::{self, FileConfig};
use crate::manifest::RunManifest;
use crate::plot;
use crate::{CliError, GlobalArgs, ResultExt};
use anyhow::{anyhow, Context as _};
use chrono::NaiveDate;
use clap::Args;
use sentalpha_core::backtest::{self, BacktestError, BacktestReport, StrategyConfig};
use sentalpha_core::features::{self, build_matrix, canonical_set, Dataset, FeatureSpec, Strategy};
use sentalpha_core::market_data::{self, align_calendar, DateSpan};
use sentalpha_core::ml::PipelineConfig;
use sentalpha_core::selection::{bo_rfe_run, BoRfeConfig, SelectionError, SelectionResult};
use sentalpha_core::sentiment::{self, IdentityLabeler, LexiconLabeler, SentimentLabeler, Session};
use sentalpha_core::stats::CorrelationReport;
use sentalpha_core::synth::{self, PlantedFeature, SynthConfig};
use serde_json::json;
use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

pub const BARS_FILE: &str = "aligned_bars.csv";
pub const COUNTS_FILE: &str = "sentiment.csv";

/// Settings shared by every command.
pub struct Context {
    pub seed: u64,
    pub out: PathBuf,
    pub file: FileConfig,
    pub pipeline: PipelineConfig,
}

impl Context {
    pub fn new(global: &GlobalArgs, file: FileConfig) -> Result<Self, CliError> {
        let out = global
            .out
            .clone()
            .ok_or_else(|| CliError::Input(anyhow!("--out <DIR> is required")))?;
        fs::create_dir_all(&out)
            .with_context(|| format!("creating {}", out.display()))
            .input()?;
        let pipeline = config::pipeline_config(&file.model).input()?;
        Ok(Self {
            seed: global.seed.or(file.seed).unwrap_or(0),
            out,
            file,
            pipeline,
        })
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

/// Render through one of the core writers into a file.
fn write_with<E>(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<(), E>) -> Result<(), CliError>
where
    E: Into<anyhow::Error>,
{
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CliError::Internal(e.into()))?;
    write(path, buf)
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String, CliError> {
    Ok(serde_json::to_string_pretty(value).map_err(anyhow::Error::from)? + "\n")
}

fn open(path: &Path) -> Result<fs::File, CliError> {
    fs::File::open(path)
        .with_context(|| format!("opening {}", path.display()))
        .input()
}

/// Load the files written by `ingest`.
fn load_dataset(dir: &Path) -> Result<(Dataset, Vec<PathBuf>), CliError> {
    let bars_path = dir.join(BARS_FILE);
    let counts_path = dir.join(COUNTS_FILE);
    let bars = market_data::parse_bars(open(&bars_path)?)
        .with_context(|| format!("reading {}", bars_path.display()))
        .input()?;
    let counts = sentiment::read_counts(open(&counts_path)?)
        .with_context(|| format!("reading {}", counts_path.display()))
        .input()?;
    let (Some(first), Some(last)) = (bars.first(), bars.last()) else {
        return Err(CliError::Input(anyhow!("{} holds no bars", bars_path.display())));
    };
    // Re-aligning an aligned file is a no-op, and it validates contiguity.
    let span = DateSpan::new(first.date, last.date);
    let aligned = align_calendar(&bars, span).input()?;
    let data = Dataset::new(aligned, &counts).input()?;
    Ok((data, vec![bars_path, counts_path]))
}

fn parse_features(names: &[String]) -> Result<Vec<FeatureSpec>, CliError> {
    names
        .iter()
        .map(|n| n.trim().parse::<FeatureSpec>().with_context(|| format!("feature {n:?}")))
        .collect::<anyhow::Result<_>>()
        .input()
}

fn builtin(name: &str) -> Option<(Strategy, usize)> {
    match name {
        "literature" => Some((Strategy::Literature, 240)),
        "borfe2" => Some((Strategy::BoRfe2, 40)),
        "borfe5" => Some((Strategy::BoRfe5, 210)),
        _ => None,
    }
}

fn check_fraction(f: f64) -> Result<f64, CliError> {
    if f > 0.0 && f < 1.0 {
        Ok(f)
    } else {
        Err(CliError::Input(anyhow!("train fraction must lie in (0, 1), got {f}")))
    }
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Calendar days of tweets; bars cover the weekdays among them.
    #[arg(long)]
    pub days: Option<usize>,
    /// First calendar day (YYYY-MM-DD).
    #[arg(long)]
    pub start: Option<NaiveDate>,
    /// Standard deviation of the unexplained part of the latent score.
    #[arg(long)]
    pub noise: Option<f64>,
    #[arg(long)]
    pub neutral_fraction: Option<f64>,
    /// Relative size of the weekly cycle in negative tweets, in [0, 1].
    #[arg(long)]
    pub weekly_amplitude: Option<f64>,
    #[arg(long)]
    pub volume_min: Option<u32>,
    #[arg(long)]
    pub volume_max: Option<u32>,
    /// Daily return volatility.
    #[arg(long)]
    pub volatility: Option<f64>,
    /// Planted feature as `NAME=STRENGTH`, e.g. `S_pre[t-0]=1.5`. Repeatable;
    /// replaces the default planted set.
    #[arg(long = "plant", value_name = "NAME=STRENGTH")]
    pub plant: Vec<String>,
}

fn parse_plant(s: &str) -> anyhow::Result<PlantedFeature> {
    let (name, w) = s
        .rsplit_once('=')
        .ok_or_else(|| anyhow!("expected NAME=STRENGTH, got {s:?}"))?;
    let strength: f64 = w.trim().parse().with_context(|| format!("strength in {s:?}"))?;
    Ok(PlantedFeature {
        name: name.trim().to_string(),
        strength,
    })
}

pub fn cmd_synth(ctx: &Context, args: &SynthArgs) -> Result<(), CliError> {
    let fc = &ctx.file.synth;
    let d = SynthConfig::default();
    let start = match (&args.start, &fc.start) {
        (Some(s), _) => *s,
        (None, Some(s)) => NaiveDate::parse_from_str(s, "%Y-%m-%d")
            .with_context(|| format!("synth.start {s:?}"))
            .input()?,
        (None, None) => d.start,
    };
    let plant: Vec<String> = if args.plant.is_empty() {
        fc.plant.clone().unwrap_or_default()
    } else {
        args.plant.clone()
    };
    let informative = if plant.is_empty() {
        d.informative.clone()
    } else {
        plant.iter().map(|p| parse_plant(p)).collect::<anyhow::Result<_>>().input()?
    };
    let cfg = SynthConfig {
        seed: ctx.seed,
        start,
        n_days: args.days.or(fc.days).unwrap_or(d.n_days),
        informative,
        noise: args.noise.or(fc.noise).unwrap_or(d.noise),
        neutral_fraction: args.neutral_fraction.or(fc.neutral_fraction).unwrap_or(d.neutral_fraction),
        weekly_amplitude: args.weekly_amplitude.or(fc.weekly_amplitude).unwrap_or(d.weekly_amplitude),
        volume_range: (
            args.volume_min.or(fc.volume_min).unwrap_or(d.volume_range.0),
            args.volume_max.or(fc.volume_max).unwrap_or(d.volume_range.1),
        ),
        volatility: args.volatility.or(fc.volatility).unwrap_or(d.volatility),
        ..d
    };
    let out = synth::generate(&cfg).input()?;
    log::info!(
        "synth: {} bars, {} tweets, oracle accuracy {:.3}",
        out.bars.len(),
        out.tweets.len(),
        out.ground_truth.oracle_accuracy
    );
    write_with(&ctx.path("bars.csv"), |b| market_data::write_bars(&out.bars, b))?;
    write_with(&ctx.path("tweets.csv"), |b| sentiment::write_labeled_tweets(&out.tweets, b))?;
    write(&ctx.path("ground_truth.json"), to_json(&out.ground_truth)?)?;
    let m = RunManifest::new("synth", ctx.seed, serde_json::to_value(&cfg).map_err(anyhow::Error::from)?);
    m.write(&ctx.out)?;
    Ok(())
}

// ---------------------------------------------------------------- ingest

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum LabelerKind {
    /// Use the labels already present; unlabeled tweets are an error.
    Identity,
    /// Label text with a bullish/bearish word list.
    Lexicon,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Daily bars CSV: `date,open,high,low,close,volume[,trade_value]`.
    #[arg(long)]
    pub bars: PathBuf,
    /// Tweets as CSV (`timestamp,label[,text]`) or JSON lines (`.jsonl`).
    #[arg(long)]
    pub tweets: PathBuf,
    #[arg(long, value_enum, default_value_t = LabelerKind::Identity)]
    pub labeler: LabelerKind,
}

pub fn cmd_ingest(ctx: &Context, args: &IngestArgs) -> Result<(), CliError> {
    let bars = market_data::parse_bars(open(&args.bars)?)
        .with_context(|| format!("reading {}", args.bars.display()))
        .input()?;
    let (Some(first), Some(last)) = (bars.first(), bars.last()) else {
        return Err(CliError::Input(anyhow!("{} holds no bars", args.bars.display())));
    };
    let span = DateSpan::new(first.date, last.date);
    let aligned = align_calendar(&bars, span).input()?;
    let returns = market_data::compute_returns(&aligned).input()?;

    let is_jsonl = matches!(
        args.tweets.extension().and_then(|e| e.to_str()),
        Some("jsonl" | "json" | "ndjson")
    );
    let records = if is_jsonl {
        sentiment::parse_tweets_jsonl(open(&args.tweets)?)
    } else {
        sentiment::parse_tweets_csv(open(&args.tweets)?)
    }
    .with_context(|| format!("reading {}", args.tweets.display()))
    .input()?;
    let labeler: &dyn SentimentLabeler = match args.labeler {
        LabelerKind::Identity => &IdentityLabeler,
        LabelerKind::Lexicon => &LexiconLabeler,
    };
    let labeled = sentiment::label_tweets(&records, labeler).input()?;
    let outside = labeled.iter().filter(|t| !span.contains(t.timestamp.date_naive())).count();
    if outside > 0 {
        log::warn!("ingest: {outside} tweets fall outside {}..={} and are ignored", span.start, span.end);
    }
    let counts = sentiment::daily_counts(&labeled, span);

    write_with(&ctx.path(BARS_FILE), |b| market_data::write_aligned(&aligned, &returns, b))?;
    write_with(&ctx.path(COUNTS_FILE), |b| sentiment::write_counts(&counts, b))?;
    let mut m = RunManifest::new(
        "ingest",
        ctx.seed,
        json!({
            "labeler": format!("{:?}", args.labeler).to_lowercase(),
            "span": [span.start.to_string(), span.end.to_string()],
            "tweets": labeled.len(),
            "tweets_outside_span": outside,
        }),
    );
    m.add_input(&args.bars)?;
    m.add_input(&args.tweets)?;
    m.write(&ctx.out)?;
    Ok(())
}

// ---------------------------------------------------------------- analyze

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Directory written by `ingest`.
    #[arg(long)]
    pub data: PathBuf,
    /// Largest lag of the cross-correlation and autocorrelation profiles.
    #[arg(long, default_value_t = 30)]
    pub max_lag: usize,
}

pub fn cmd_analyze(ctx: &Context, args: &AnalyzeArgs) -> Result<(), CliError> {
    let (data, inputs) = load_dataset(&args.data)?;
    let dates = data.label_dates().to_vec();
    let returns = data.returns().values().to_vec();
    let volume: Vec<f64> = data.bars()[1..].iter().map(|b| b.volume).collect();
    let count = |f: fn(&sentiment::SessionCounts) -> f64| -> Vec<f64> {
        dates
            .iter()
            .map(|&d| data.counts(d, Session::FullDay).as_ref().map_or(0.0, f))
            .collect()
    };
    let series = [
        ("P", count(|c| c.positive as f64)),
        ("N", count(|c| c.negative as f64)),
        ("n", count(|c| c.neutral as f64)),
        ("T", count(|c| c.total() as f64)),
    ];

    let mut report = CorrelationReport::default();
    for (name, x) in &series {
        report.add_pair(name, x, "R", &returns);
        report.add_pair(name, x, "Volume", &volume);
    }
    let negatives = &series[1].1;
    report.add_lag_profile("N", negatives, "R", &returns, args.max_lag);
    report.add_acf("N", negatives, args.max_lag);
    for d in &report.diagnostics {
        log::warn!("analyze: {d}");
    }

    let table = |entries: &[sentalpha_core::stats::CorrelationEntry]| {
        let mut b = Vec::new();
        CorrelationReport::write_table(entries, &mut b).map(|_| b)
    };
    write(&ctx.path("correlation.csv"), table(&report.pairs).map_err(anyhow::Error::from)?)?;
    write(&ctx.path("lag_correlation.csv"), table(&report.lag_profile).map_err(anyhow::Error::from)?)?;
    write(&ctx.path("acf.csv"), table(&report.acf).map_err(anyhow::Error::from)?)?;
    write(&ctx.path("report.json"), to_json(&report)?)?;

    let r_or_nan = |e: &sentalpha_core::stats::CorrelationEntry| e.r.unwrap_or(f64::NAN);
    let lags: Vec<String> = (0..=args.max_lag).map(|l| l.to_string()).collect();
    let pair_labels: Vec<String> = report.pairs.iter().map(|e| format!("{}~{}", e.series_a, e.series_b)).collect();
    write(
        &ctx.path("correlation.svg"),
        plot::bar_chart(
            "Correlation of daily tweet counts",
            "Pearson r",
            &pair_labels,
            &report.pairs.iter().map(r_or_nan).collect::<Vec<_>>(),
        ),
    )?;
    write(
        &ctx.path("lag_correlation.svg"),
        plot::line_chart(
            "corr(N[t], R[t+lag])",
            "Pearson r",
            &lags,
            &[("N -> R", &report.lag_profile.iter().map(r_or_nan).collect::<Vec<_>>())],
        ),
    )?;
    write(
        &ctx.path("acf.svg"),
        plot::bar_chart(
            "Autocorrelation of negative tweet counts",
            "ACF",
            &lags,
            &report.acf.iter().map(r_or_nan).collect::<Vec<_>>(),
        ),
    )?;

    let mut m = RunManifest::new("analyze", ctx.seed, json!({ "max_lag": args.max_lag, "days": dates.len() }));
    for p in &inputs {
        m.add_input(p)?;
    }
    m.write(&ctx.out)?;
    Ok(())
}

// ---------------------------------------------------------------- select

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Directory written by `ingest`.
    #[arg(long)]
    pub data: PathBuf,
    /// Candidate features: a built-in set (`literature`, `borfe2`, `borfe5`).
    #[arg(long)]
    pub base: Option<String>,
    /// Explicit comma-separated candidate features; overrides `--base`.
    #[arg(long, value_delimiter = ',')]
    pub features: Vec<String>,
    /// Objective evaluations.
    #[arg(long)]
    pub bo_iters: Option<usize>,
    /// Trading days the objective trains on.
    #[arg(long)]
    pub train_days: Option<usize>,
    /// Trading days the objective scores on.
    #[arg(long)]
    pub test_days: Option<usize>,
    #[arg(long)]
    pub theta_max: Option<usize>,
    #[arg(long)]
    pub gamma_max: Option<usize>,
    #[arg(long)]
    pub init_points: Option<usize>,
    /// Share of days before the held-out test span.
    #[arg(long)]
    pub train_fraction: Option<f64>,
}

fn selection_error(e: SelectionError) -> CliError {
    match e {
        SelectionError::NotEnoughRows { needed, available } => CliError::Input(anyhow!(
            "not enough data for selection: the objective needs {needed} trading days \
             before the test span, the dataset has {available}"
        )),
        SelectionError::InvalidConfig(_) => CliError::Input(e.into()),
        e => CliError::Internal(e.into()),
    }
}

pub fn cmd_select(ctx: &Context, args: &SelectArgs) -> Result<(), CliError> {
    let fc = &ctx.file.select;
    let (data, inputs) = load_dataset(&args.data)?;
    let features = if !args.features.is_empty() {
        parse_features(&args.features)?
    } else if let (None, Some(list)) = (&args.base, &fc.features) {
        parse_features(list)?
    } else {
        let base = args.base.clone().or(fc.base.clone()).unwrap_or_else(|| "literature".into());
        let (s, _) = builtin(&base)
            .ok_or_else(|| CliError::Input(anyhow!("unknown base set {base:?}; use literature, borfe2 or borfe5")))?;
        canonical_set(s)
    };
    let names: HashSet<String> = features.iter().map(FeatureSpec::name).collect();
    if names.len() != features.len() {
        return Err(CliError::Input(anyhow!("candidate features contain duplicates")));
    }
    let d = BoRfeConfig::default();
    let cfg = BoRfeConfig {
        iterations: args.bo_iters.or(fc.bo_iters).unwrap_or(d.iterations),
        gamma_max: args.gamma_max.or(fc.gamma_max),
        theta_max: args.theta_max.or(fc.theta_max).unwrap_or(d.theta_max),
        train_rows: args.train_days.or(fc.train_days).unwrap_or(d.train_rows),
        test_rows: args.test_days.or(fc.test_days).unwrap_or(d.test_rows),
        init_points: args.init_points.or(fc.init_points).unwrap_or(d.init_points),
        seed: ctx.seed,
        pipeline: ctx.pipeline,
        ..d
    };
    let fraction = check_fraction(args.train_fraction.or(fc.train_fraction).unwrap_or(0.84))?;
    let matrix = build_matrix(&data, &features, data.span()).input()?;
    let cut = features::split_date(&data, fraction).input()?;
    let (trainval, _) = matrix.split_at_date(cut);
    let result = bo_rfe_run(&trainval, &cfg).map_err(selection_error)?;
    log::info!(
        "select: gamma {} theta {} f1 {:.4} {:?}",
        result.gamma,
        result.theta,
        result.best_f1,
        result.features
    );

    write(&ctx.path("selection.json"), result.to_json() + "\n")?;
    write_with(&ctx.path("selection_trace.csv"), |b| result.write_trace(b))?;
    let ks: Vec<String> = result.history.iter().map(|e| e.k.to_string()).collect();
    write(
        &ctx.path("f1_trace.svg"),
        plot::line_chart(
            "Objective by iteration",
            "F1",
            &ks,
            &[("f1", &result.f1_history()), ("best so far", &result.running_best())],
        ),
    )?;
    let mut m = RunManifest::new(
        "select",
        ctx.seed,
        json!({
            "candidates": features.iter().map(FeatureSpec::name).collect::<Vec<_>>(),
            "train_fraction": fraction,
            "test_start": cut.to_string(),
            "bo": serde_json::to_value(&cfg).map_err(anyhow::Error::from)?,
        }),
    );
    for p in &inputs {
        m.add_input(p)?;
    }
    m.write(&ctx.out)?;
    Ok(())
}

// ---------------------------------------------------------------- backtest

#[derive(Debug, Args)]
pub struct BacktestArgs {
    /// Directory written by `ingest`.
    #[arg(long)]
    pub data: PathBuf,
    /// Strategy to run (repeatable): `literature`, `borfe2`, `borfe5`,
    /// `selected`, or a `[[strategies]]` name from the config file.
    #[arg(long = "strategy")]
    pub strategies: Vec<String>,
    /// `selection.json` written by `select`; adds the `selected` strategy.
    #[arg(long)]
    pub selection: Option<PathBuf>,
    /// Training window of the `selected` strategy.
    #[arg(long, default_value_t = 210)]
    pub selection_window: usize,
    /// Share of days before the test span.
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Capital traded each day.
    #[arg(long)]
    pub notional: Option<f64>,
    /// Trading days per F1 batch.
    #[arg(long)]
    pub batch_size: Option<usize>,
}

fn backtest_error(name: &str, e: BacktestError) -> CliError {
    let input = matches!(
        e,
        BacktestError::InsufficientHistory { .. } | BacktestError::InvalidConfig(_) | BacktestError::EmptyTestSpan
    );
    let e = anyhow::Error::from(e).context(format!("strategy {name}"));
    if input {
        CliError::Input(e)
    } else {
        CliError::Internal(e)
    }
}

fn valid_name(name: &str) -> bool {
    !name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn resolve_strategies(ctx: &Context, args: &BacktestArgs) -> Result<(Vec<StrategyConfig>, Vec<PathBuf>), CliError> {
    let mut inputs = Vec::new();
    let selected = match &args.selection {
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading {}", p.display()))
                .input()?;
            let sel = SelectionResult::from_json(&text)
                .with_context(|| format!("parsing {}", p.display()))
                .input()?;
            inputs.push(p.clone());
            Some(sel)
        }
        None => None,
    };
    let custom = &ctx.file.strategies;
    let names: Vec<String> = if !args.strategies.is_empty() {
        args.strategies.clone()
    } else if let Some(list) = &ctx.file.backtest.strategies {
        list.clone()
    } else {
        let mut v: Vec<String> = ["literature", "borfe2", "borfe5"].map(String::from).to_vec();
        v.extend(custom.iter().map(|s| s.name.clone()));
        if selected.is_some() {
            v.push("selected".into());
        }
        v
    };
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for name in names {
        if !valid_name(&name) {
            return Err(CliError::Input(anyhow!(
                "strategy name {name:?} must be non-empty ASCII letters, digits, '_' or '-'"
            )));
        }
        if !seen.insert(name.clone()) {
            return Err(CliError::Input(anyhow!("strategy {name} listed twice")));
        }
        let (features, window) = if let Some(c) = custom.iter().find(|c| c.name == name) {
            (parse_features(&c.features)?, c.window)
        } else if let Some((s, w)) = builtin(&name) {
            (canonical_set(s), w)
        } else if name == "selected" {
            let sel = selected
                .as_ref()
                .ok_or_else(|| CliError::Input(anyhow!("strategy `selected` needs --selection")))?;
            (sel.feature_specs().input()?, args.selection_window)
        } else {
            return Err(CliError::Input(anyhow!("unknown strategy {name:?}")));
        };
        let cfg = StrategyConfig {
            name: name.clone(),
            features,
            window,
            pipeline: ctx.pipeline,
            seed: ctx.seed,
        };
        cfg.validate().map_err(|e| backtest_error(&name, e))?;
        out.push(cfg);
    }
    if out.is_empty() {
        return Err(CliError::Input(anyhow!("no strategies to run")));
    }
    Ok((out, inputs))
}

pub fn cmd_backtest(ctx: &Context, args: &BacktestArgs) -> Result<(), CliError> {
    let fc = &ctx.file.backtest;
    let (data, mut inputs) = load_dataset(&args.data)?;
    let (strategies, extra) = resolve_strategies(ctx, args)?;
    inputs.extend(extra);
    let fraction = check_fraction(args.train_fraction.or(fc.train_fraction).unwrap_or(0.84))?;
    let notional = args.notional.or(fc.notional).unwrap_or(10_000.0);
    let batch_size = args.batch_size.or(fc.batch_size).unwrap_or(10);
    if !(notional > 0.0 && notional.is_finite()) || batch_size == 0 {
        return Err(CliError::Input(anyhow!("notional and batch size must be positive")));
    }
    let cut = features::split_date(&data, fraction).input()?;
    let test_span = DateSpan::new(cut, data.span().end);

    let mut reports: Vec<BacktestReport> = Vec::new();
    for cfg in &strategies {
        let matrix = build_matrix(&data, &cfg.features, data.span()).input()?;
        let report = backtest::run_backtest(&matrix, data.returns(), test_span, cfg, notional, batch_size)
            .map_err(|e| backtest_error(&cfg.name, e))?;
        log::info!(
            "backtest {}: f1 {:.4} final pnl {:.2}",
            cfg.name,
            report.metrics.f1,
            report.final_pnl
        );
        let dir = ctx.out.join(&cfg.name);
        write_with(&dir.join("predictions.csv"), |b| report.write_predictions(b))?;
        write(
            &dir.join("metrics.json"),
            to_json(&json!({
                "strategy": report.strategy,
                "window": report.window,
                "features": report.features,
                "metrics": report.metrics,
                "final_pnl": report.final_pnl,
                "test_days": report.days.len(),
            }))?,
        )?;
        write_with(&dir.join("batch_f1.csv"), |b| write_batches(&report, b))?;
        reports.push(report);
    }

    let cmp = backtest::compare_strategies(&reports).map_err(|e| CliError::Internal(e.into()))?;
    write_with(&ctx.path("comparison.csv"), |b| cmp.write_table(b))?;
    write_with(&ctx.path("batch_f1_box.csv"), |b| cmp.write_box_table(b))?;
    write_with(&ctx.path("cum_pnl.csv"), |b| cmp.write_cum_pnl(b))?;
    let boxes: Vec<(&str, backtest::BoxStats)> = cmp
        .summaries
        .iter()
        .filter_map(|s| s.batch_f1.map(|b| (s.strategy.as_str(), b)))
        .collect();
    write(&ctx.path("batch_f1_box.svg"), plot::box_chart("F1 per batch", "F1", &boxes))?;
    let labels: Vec<String> = cmp.dates.iter().map(|d| d.to_string()).collect();
    let curves: Vec<(&str, &[f64])> = cmp
        .summaries
        .iter()
        .zip(&cmp.cum_pnl)
        .map(|(s, c)| (s.strategy.as_str(), c.as_slice()))
        .collect();
    write(
        &ctx.path("cum_pnl.svg"),
        plot::line_chart("Cumulative profit", "P&L", &labels, &curves),
    )?;

    let mut m = RunManifest::new(
        "backtest",
        ctx.seed,
        json!({
            "train_fraction": fraction,
            "test_span": [test_span.start.to_string(), test_span.end.to_string()],
            "notional": notional,
            "batch_size": batch_size,
            "pipeline": serde_json::to_value(ctx.pipeline).map_err(anyhow::Error::from)?,
            "strategies": strategies.iter().map(|s| json!({
                "name": s.name,
                "window": s.window,
                "features": s.features.iter().map(FeatureSpec::name).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        }),
    );
    for p in &inputs {
        m.add_input(p)?;
    }
    m.write(&ctx.out)?;
    Ok(())
}

fn write_batches(report: &BacktestReport, sink: &mut Vec<u8>) -> anyhow::Result<()> {
    use std::io::Write;
    writeln!(sink, "batch,start,end,days,f1,partial")?;
    for (i, b) in report.batches.iter().enumerate() {
        writeln!(sink, "{},{},{},{},{},{}", i + 1, b.start, b.end, b.days, b.f1, b.partial)?;
    }
    Ok(())
}
