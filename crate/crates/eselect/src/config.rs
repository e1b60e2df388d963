//! Run configuration: grids, durations, a TOML file layer and flag overrides.
//!
//! Durations are counted in 15-minute steps: `1h = 4`, `1d = 96`,
//! `14d = 1344`; a bare integer is a step count. Grids are comma-separated
//! lists whose items may be ranges `start:end:step` (inclusive).

use std::path::{Path, PathBuf};

use eselect_core::{Arm, EvidenceConfig, FusionConfig, SelectionConfig, Strategy, WarmupPolicy};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

/// Steps per hour at 15-minute resolution.
pub const STEPS_PER_HOUR: usize = 4;
/// Steps per day at 15-minute resolution.
pub const STEPS_PER_DAY: usize = 96;

/// Parses a duration into steps.
pub fn parse_duration(text: &str) -> Result<usize> {
    let s = text.trim();
    let bad = || HarnessError::config(format!("'{text}' is not a duration (use steps, or e.g. 15m, 2h, 7d)"));
    let (digits, factor) = match s.char_indices().last() {
        Some((i, 'd')) => (&s[..i], STEPS_PER_DAY),
        Some((i, 'h')) => (&s[..i], STEPS_PER_HOUR),
        Some((i, 'm')) => {
            let minutes: usize = s[..i].trim().parse().map_err(|_| bad())?;
            if minutes % 15 != 0 {
                return Err(HarnessError::config(format!(
                    "'{text}' is not a whole number of 15-minute steps"
                )));
            }
            return Ok(minutes / 15);
        }
        _ => (s, 1),
    };
    let n: usize = digits.trim().parse().map_err(|_| bad())?;
    n.checked_mul(factor).ok_or_else(bad)
}

/// Formats a step count with the largest exact unit (`672 → 7d`).
pub fn format_duration(steps: usize) -> String {
    if steps > 0 && steps % STEPS_PER_DAY == 0 {
        format!("{}d", steps / STEPS_PER_DAY)
    } else if steps > 0 && steps % STEPS_PER_HOUR == 0 {
        format!("{}h", steps / STEPS_PER_HOUR)
    } else {
        steps.to_string()
    }
}

/// Risk weights: values or `start:end:step` ranges, sorted and deduplicated.
/// Every entry must lie in `[0, 1)`.
pub fn parse_lambda_grid(text: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let number = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| HarnessError::config(format!("'{s}' in lambda grid is not a number")))
        };
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(number(v)?),
            [a, b, step] => {
                let (a, b, step) = (number(a)?, number(b)?, number(step)?);
                if !(step > 0.0) || b < a {
                    return Err(HarnessError::config(format!("bad lambda range '{item}'")));
                }
                let count = ((b - a) / step + 1e-9).floor() as usize;
                // Index-based values avoid accumulated drift; rounding to 12
                // places makes 0.07 print as 0.07.
                out.extend((0..=count).map(|i| round12(a + i as f64 * step)));
            }
            _ => return Err(HarnessError::config(format!("bad lambda grid item '{item}'"))),
        }
    }
    for &l in &out {
        if !(0.0..1.0).contains(&l) {
            return Err(HarnessError::config(format!("lambda {l} outside [0, 1)")));
        }
    }
    out.sort_by(f64::total_cmp);
    out.dedup();
    if out.is_empty() {
        return Err(HarnessError::config("empty lambda grid"));
    }
    Ok(out)
}

fn round12(x: f64) -> f64 {
    (x * 1e12).round() / 1e12
}

/// Window lengths: durations or `start:end:step` duration ranges, sorted and
/// deduplicated; each at least one step.
pub fn parse_window_grid(text: &str) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let parts: Vec<&str> = item.split(':').collect();
        match parts.as_slice() {
            [v] => out.push(parse_duration(v)?),
            [a, b, step] => {
                let (a, b, step) = (parse_duration(a)?, parse_duration(b)?, parse_duration(step)?);
                if step == 0 || b < a {
                    return Err(HarnessError::config(format!("bad window range '{item}'")));
                }
                out.extend((a..=b).step_by(step));
            }
            _ => return Err(HarnessError::config(format!("bad window grid item '{item}'"))),
        }
    }
    if out.contains(&0) {
        return Err(HarnessError::config("window must be at least one step"));
    }
    out.sort_unstable();
    out.dedup();
    if out.is_empty() {
        return Err(HarnessError::config("empty window grid"));
    }
    Ok(out)
}

/// Comma-separated strategy names.
pub fn parse_strategies(text: &str) -> Result<Vec<Strategy>> {
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let s: Strategy = item
            .parse()
            .map_err(|_| HarnessError::config(format!("unknown strategy '{item}' (persistence, sampling, wavg)")))?;
        out.push(s);
    }
    out.sort();
    out.dedup();
    if out.is_empty() {
        return Err(HarnessError::config("empty strategy list"));
    }
    Ok(out)
}

pub fn parse_warmup(text: &str) -> Result<WarmupPolicy> {
    match text.trim().to_ascii_lowercase().as_str() {
        "strict" => Ok(WarmupPolicy::Strict),
        "expanding" => Ok(WarmupPolicy::Expanding),
        other => Err(HarnessError::config(format!(
            "unknown warmup policy '{other}' (strict, expanding)"
        ))),
    }
}

pub fn parse_arm(text: &str) -> Result<Arm> {
    text.trim()
        .parse()
        .map_err(|_| HarnessError::config(format!("unknown arm '{text}' (p, q)")))
}

/// `λ ∈ {0.01, 0.02, …, 0.99}`.
pub fn default_lambda_grid() -> Vec<f64> {
    (1..=99).map(|i| round12(i as f64 / 100.0)).collect()
}

/// `{1h, 2h} ∪ {1d, …, 14d}`.
pub fn default_window_grid() -> Vec<usize> {
    let mut w = vec![STEPS_PER_HOUR, 2 * STEPS_PER_HOUR];
    w.extend((1..=14).map(|d| d * STEPS_PER_DAY));
    w
}

/// Every setting, each optional so that the file layer and the flag layer
/// can be merged; grids are kept as text until resolution.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub input: Option<PathBuf>,
    pub alpha: Option<f64>,
    #[serde(default, deserialize_with = "grid_text")]
    pub lambda: Option<String>,
    #[serde(default, deserialize_with = "grid_text")]
    pub window: Option<String>,
    #[serde(default, deserialize_with = "grid_text")]
    pub strategy: Option<String>,
    #[serde(default, deserialize_with = "grid_text")]
    pub lag: Option<String>,
    #[serde(default, deserialize_with = "grid_text")]
    pub calibration: Option<String>,
    pub seed: Option<u64>,
    pub initial_arm: Option<String>,
    pub warmup: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub threads: Option<usize>,
    pub replications: Option<usize>,
    pub length: Option<usize>,
}

/// Accepts a number, a string or an array of either and flattens it to the
/// comma-separated text form used on the command line.
fn grid_text<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<String>, D::Error> {
    fn scalar(v: &toml::Value) -> Option<String> {
        match v {
            toml::Value::String(s) => Some(s.clone()),
            toml::Value::Integer(i) => Some(i.to_string()),
            toml::Value::Float(f) => Some(f.to_string()),
            _ => None,
        }
    }
    let v = toml::Value::deserialize(d)?;
    let text = match &v {
        toml::Value::Array(items) => items
            .iter()
            .map(scalar)
            .collect::<Option<Vec<_>>>()
            .map(|parts| parts.join(",")),
        other => scalar(other),
    };
    text.map(Some)
        .ok_or_else(|| serde::de::Error::custom("expected a number, a string or a list"))
}

impl ConfigLayer {
    /// Reads a TOML configuration file.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| HarnessError::config(format!("{}: {e}", path.display())))
    }

    /// `self` with every field that `over` sets replaced.
    pub fn merged_with(self, over: ConfigLayer) -> Self {
        Self {
            input: over.input.or(self.input),
            alpha: over.alpha.or(self.alpha),
            lambda: over.lambda.or(self.lambda),
            window: over.window.or(self.window),
            strategy: over.strategy.or(self.strategy),
            lag: over.lag.or(self.lag),
            calibration: over.calibration.or(self.calibration),
            seed: over.seed.or(self.seed),
            initial_arm: over.initial_arm.or(self.initial_arm),
            warmup: over.warmup.or(self.warmup),
            output_dir: over.output_dir.or(self.output_dir),
            threads: over.threads.or(self.threads),
            replications: over.replications.or(self.replications),
            length: over.length.or(self.length),
        }
    }

    /// Validates and fills defaults. Grids default to `defaults`.
    pub fn resolve(&self, defaults: &GridDefaults) -> Result<RunConfig> {
        let alpha = self.alpha.unwrap_or(0.05);
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(HarnessError::config(format!("alpha {alpha} outside (0, 1)")));
        }
        let lambdas = match &self.lambda {
            Some(t) => parse_lambda_grid(t)?,
            None => defaults.lambdas.clone(),
        };
        let windows = match &self.window {
            Some(t) => parse_window_grid(t)?,
            None => defaults.windows.clone(),
        };
        let strategies = match &self.strategy {
            Some(t) => parse_strategies(t)?,
            None => defaults.strategies.clone(),
        };
        let lag = self
            .lag
            .as_deref()
            .map(parse_duration)
            .transpose()?
            .unwrap_or(STEPS_PER_DAY);
        let calibration_length = self
            .calibration
            .as_deref()
            .map(parse_duration)
            .transpose()?
            .unwrap_or(7 * STEPS_PER_DAY);
        if calibration_length < 2 {
            return Err(HarnessError::config("calibration needs at least 2 steps"));
        }
        let initial_arm = self
            .initial_arm
            .as_deref()
            .map(parse_arm)
            .transpose()?
            .unwrap_or_default();
        let warmup = self
            .warmup
            .as_deref()
            .map(parse_warmup)
            .transpose()?
            .unwrap_or_default();
        if self.threads == Some(0) {
            return Err(HarnessError::config("threads must be at least 1"));
        }
        let replications = self.replications.unwrap_or(defaults.replications);
        if replications == 0 {
            return Err(HarnessError::config("replications must be at least 1"));
        }
        let length = self.length.unwrap_or(defaults.length);
        if length == 0 {
            return Err(HarnessError::config("length must be at least 1"));
        }
        Ok(RunConfig {
            input: self.input.clone(),
            alpha,
            lambdas,
            windows,
            strategies,
            lag,
            calibration_length,
            seed: self.seed.unwrap_or(0),
            initial_arm,
            warmup,
            output_dir: self.output_dir.clone().unwrap_or_else(|| PathBuf::from("eselect-out")),
            threads: self.threads,
            replications,
            length,
        })
    }
}

/// Grid defaults differ per subcommand.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDefaults {
    pub lambdas: Vec<f64>,
    pub windows: Vec<usize>,
    pub strategies: Vec<Strategy>,
    pub replications: usize,
    pub length: usize,
}

impl GridDefaults {
    /// Single run: `λ = 0.1`, `ω = 7d`, persistence.
    pub fn single() -> Self {
        Self {
            lambdas: vec![0.1],
            windows: vec![7 * STEPS_PER_DAY],
            strategies: vec![Strategy::Persistence],
            replications: 10_000,
            length: 1000,
        }
    }

    /// Full sweep grids and every strategy.
    pub fn sweep() -> Self {
        Self {
            lambdas: default_lambda_grid(),
            windows: default_window_grid(),
            strategies: Strategy::ALL.to_vec(),
            ..Self::single()
        }
    }

    /// Monte Carlo plan: `λ ∈ {0.1, 0.5, 0.9}`, `ω ∈ {1d, 7d}`.
    pub fn validation() -> Self {
        Self {
            lambdas: vec![0.1, 0.5, 0.9],
            windows: vec![STEPS_PER_DAY, 7 * STEPS_PER_DAY],
            ..Self::single()
        }
    }
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub alpha: f64,
    pub lambdas: Vec<f64>,
    pub windows: Vec<usize>,
    pub strategies: Vec<Strategy>,
    pub lag: usize,
    pub calibration_length: usize,
    pub seed: u64,
    pub initial_arm: Arm,
    pub warmup: WarmupPolicy,
    pub output_dir: PathBuf,
    pub threads: Option<usize>,
    pub replications: usize,
    pub length: usize,
}

impl RunConfig {
    pub fn input(&self) -> Result<&Path> {
        self.input
            .as_deref()
            .ok_or_else(|| HarnessError::config("no input file given (--input or 'input' in the config file)"))
    }

    pub fn evidence(&self, lambda: f64, window: usize) -> EvidenceConfig {
        EvidenceConfig {
            alpha: self.alpha,
            lambda,
            window,
            calibration_length: self.calibration_length,
            warmup: self.warmup,
        }
    }

    pub fn fusion(&self, strategy: Strategy) -> FusionConfig {
        FusionConfig {
            strategy,
            lag: self.lag,
            seed: self.seed,
            initial_arm: self.initial_arm,
        }
    }

    /// The single configuration of a `run`; grids must have one entry each.
    pub fn single(&self) -> Result<SelectionConfig> {
        match (
            self.lambdas.as_slice(),
            self.windows.as_slice(),
            self.strategies.as_slice(),
        ) {
            ([l], [w], [s]) => Ok(SelectionConfig {
                evidence: self.evidence(*l, *w),
                fusion: self.fusion(*s),
            }),
            _ => Err(HarnessError::config(
                "a single run takes one lambda, one window and one strategy; use 'sweep' for grids",
            )),
        }
    }
}
