//! Optional TOML run configuration. Command-line flags take precedence.

use anyhow::{bail, Context, Result};
use sentalpha_core::ml::{GammaRule, PipelineConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub model: ModelSection,
    pub synth: SynthSection,
    pub select: SelectSection,
    pub backtest: BacktestSection,
    pub strategies: Vec<StrategySection>,
}

/// `gamma` is either `"scale"` or a positive number.
#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub c: Option<f64>,
    pub gamma: Option<toml::Value>,
    pub members: Option<usize>,
    pub smote_k: Option<usize>,
    pub tol: Option<f64>,
    pub max_passes: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSection {
    pub days: Option<usize>,
    pub start: Option<String>,
    pub noise: Option<f64>,
    pub neutral_fraction: Option<f64>,
    pub weekly_amplitude: Option<f64>,
    pub volume_min: Option<u32>,
    pub volume_max: Option<u32>,
    pub volatility: Option<f64>,
    /// Entries like `"S_pre[t-0]=1.5"`.
    pub plant: Option<Vec<String>>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectSection {
    pub base: Option<String>,
    pub features: Option<Vec<String>>,
    pub bo_iters: Option<usize>,
    pub train_days: Option<usize>,
    pub test_days: Option<usize>,
    pub theta_max: Option<usize>,
    pub gamma_max: Option<usize>,
    pub init_points: Option<usize>,
    pub train_fraction: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestSection {
    pub train_fraction: Option<f64>,
    pub notional: Option<f64>,
    pub batch_size: Option<usize>,
    pub strategies: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySection {
    pub name: String,
    pub features: Vec<String>,
    pub window: usize,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

pub fn parse_gamma(v: &toml::Value) -> Result<GammaRule> {
    match v {
        toml::Value::String(s) if s == "scale" => Ok(GammaRule::Scale),
        toml::Value::String(s) => parse_gamma_str(s),
        toml::Value::Float(g) if *g > 0.0 => Ok(GammaRule::Fixed(*g)),
        toml::Value::Integer(g) if *g > 0 => Ok(GammaRule::Fixed(*g as f64)),
        other => bail!("model.gamma must be \"scale\" or a positive number, got {other}"),
    }
}

pub fn parse_gamma_str(s: &str) -> Result<GammaRule> {
    if s == "scale" {
        return Ok(GammaRule::Scale);
    }
    match s.parse::<f64>() {
        Ok(g) if g > 0.0 && g.is_finite() => Ok(GammaRule::Fixed(g)),
        _ => bail!("gamma must be \"scale\" or a positive number, got {s:?}"),
    }
}

/// Model settings from the config file over the defaults.
pub fn pipeline_config(model: &ModelSection) -> Result<PipelineConfig> {
    let d = PipelineConfig::default();
    let cfg = PipelineConfig {
        c: model.c.unwrap_or(d.c),
        gamma: model.gamma.as_ref().map(parse_gamma).transpose()?.unwrap_or(d.gamma),
        members: model.members.unwrap_or(d.members),
        smote_k: model.smote_k.unwrap_or(d.smote_k),
        tol: model.tol.unwrap_or(d.tol),
        max_passes: model.max_passes.unwrap_or(d.max_passes),
    };
    if !(cfg.c > 0.0) || cfg.members == 0 || cfg.smote_k == 0 || !(cfg.tol > 0.0) || cfg.max_passes == 0 {
        bail!("model settings must be positive: {cfg:?}");
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_file() {
        let cfg: FileConfig = toml::from_str(
            r#"
seed = 3
[model]
gamma = 0.5
members = 3
[backtest]
strategies = ["borfe2"]
[[strategies]]
name = "mine"
features = ["R[t-1]", "N[t-7]"]
window = 30
"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, Some(3));
        assert_eq!(pipeline_config(&cfg.model).unwrap().gamma, GammaRule::Fixed(0.5));
        assert_eq!(cfg.strategies[0].window, 30);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<FileConfig>("sed = 1").is_err());
        assert!(parse_gamma_str("-1").is_err());
        assert_eq!(parse_gamma_str("scale").unwrap(), GammaRule::Scale);
    }
}
