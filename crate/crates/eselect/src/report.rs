//! Output files.
//!
//! | file                       | content                                        |
//! |----------------------------|------------------------------------------------|
//! | `steps.csv`                | per-step evidence, band (also in Watts), decision |
//! | `summary.json`             | run summary and benchmark                      |
//! | `sweep.csv`                | one row per `(λ, ω, strategy)`                 |
//! | `heatmap_<strategy>.csv`   | `ω × λ` improvement over the better baseline   |
//! | `validation.json`          | Monte Carlo checks                             |
//! | `bench.json`               | oracle and baselines                           |
//! | `runtime.csv`              | wall-clock seconds per configuration           |
//! | `metadata.json`            | configuration, seed, σ, versions, input facts  |
//!
//! Everything except `runtime.csv` is a pure function of inputs, config and
//! seed, so reruns produce byte-identical files.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use eselect_core::{Benchmark, EvidenceTrace, SelectionRun, SelectionSummary, Source, Strategy};
use serde::Serialize;

use crate::config::{format_duration, RunConfig};
use crate::error::{HarnessError, Result};
use crate::ingest::Dataset;
use crate::sweep::{heatmap, SweepOutcome, EXCLUSION_RULE};
use crate::validate::ValidationReport;

/// Facts about the ingested input.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputFacts {
    pub path: Option<PathBuf>,
    pub steps: usize,
    pub horizon: usize,
    pub dropped_trailing_rows: usize,
    pub shift_consistency: Option<f64>,
}

impl InputFacts {
    pub fn from_dataset(path: Option<&Path>, d: &Dataset) -> Self {
        Self {
            path: path.map(Path::to_path_buf),
            steps: d.len(),
            horizon: d.horizon,
            dropped_trailing_rows: d.dropped_trailing,
            shift_consistency: d.shift_consistency(),
        }
    }
}

/// Run metadata document.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub command: String,
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    pub config: RunConfig,
    pub seed: u64,
    pub sigma: Option<f64>,
    pub calibration_length: usize,
    pub input: Option<InputFacts>,
    pub exclusion_rule: &'static str,
    pub files: Vec<String>,
}

impl Metadata {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.to_string(),
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            core_version: eselect_core::VERSION,
            config: config.clone(),
            seed: config.seed,
            sigma: None,
            calibration_length: config.calibration_length,
            input: None,
            exclusion_rule: EXCLUSION_RULE,
            files: Vec::new(),
        }
    }
}

/// Collects outputs for one invocation and writes them into a directory.
#[derive(Debug)]
pub struct ReportWriter {
    dir: PathBuf,
    metadata: Metadata,
}

fn f(x: f64) -> String {
    if x.is_nan() {
        String::new()
    } else {
        x.to_string()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(f).unwrap_or_default()
}

fn source_name(s: Source) -> &'static str {
    match s {
        Source::P => "P",
        Source::Q => "Q",
        Source::Fused => "FUSED",
        Source::Warmup => "WARMUP",
    }
}

impl ReportWriter {
    /// Creates the output directory if needed.
    pub fn create(dir: &Path, metadata: Metadata) -> Result<Self> {
        fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            metadata,
        })
    }

    pub fn metadata_mut(&mut self) -> &mut Metadata {
        &mut self.metadata
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn open(&mut self, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
        let path = self.dir.join(name);
        let file = File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
        self.metadata.files.push(name.to_string());
        Ok((path, BufWriter::new(file)))
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let (path, out) = self.open(name)?;
        let err = |e: csv::Error| HarnessError::Format {
            path: path.clone(),
            message: e.to_string(),
        };
        let mut w = csv::Writer::from_writer(out);
        w.write_record(header).map_err(err)?;
        for row in rows {
            w.write_record(&row).map_err(err)?;
        }
        w.flush().map_err(|e| HarnessError::io(&path, e))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let (path, mut out) = self.open(name)?;
        serde_json::to_writer_pretty(&mut out, value).map_err(|e| HarnessError::Format {
            path: path.clone(),
            message: e.to_string(),
        })?;
        writeln!(out)
            .and_then(|_| out.flush())
            .map_err(|e| HarnessError::io(&path, e))
    }

    /// Per-step chart and decision data. Steps inside the calibration
    /// stretch carry evidence only.
    pub fn write_steps(&mut self, trace: &EvidenceTrace, run: &SelectionRun) -> Result<()> {
        let decisions: BTreeMap<u64, _> = run.records.iter().map(|r| (r.evidence.t, r)).collect();
        let header = [
            "t",
            "mae_p",
            "mae_q",
            "delta_hat",
            "delta_tilde",
            "rolling_mean",
            "v_hat",
            "log_e",
            "log_e_star",
            "p_value",
            "p_value_star",
            "reject_h0_pq",
            "reject_h0_qp",
            "band_lower",
            "band_upper",
            "band_lower_watts",
            "band_upper_watts",
            "source",
            "w_p",
            "w_q",
            "basis_step",
            "rejection_driven",
            "fused_mae",
        ];
        let rows = trace.steps.iter().map(|s| {
            let v = s.verdict.as_ref();
            let b = s.band.as_ref();
            let mut row = vec![
                s.t.to_string(),
                f(s.mae_p),
                f(s.mae_q),
                f(s.delta_hat),
                f(s.delta_tilde),
                opt(s.rolling_mean),
                opt(s.v_hat),
                opt(v.map(|v| v.log_e)),
                opt(v.map(|v| v.log_e_star)),
                opt(v.map(|v| v.p_value)),
                opt(v.map(|v| v.p_value_star)),
                v.map(|v| v.reject_h0_pq.to_string()).unwrap_or_default(),
                v.map(|v| v.reject_h0_qp.to_string()).unwrap_or_default(),
                opt(b.map(|b| b.lower)),
                opt(b.map(|b| b.upper)),
                opt(b.and_then(|b| b.lower_watts)),
                opt(b.and_then(|b| b.upper_watts)),
            ];
            match decisions.get(&s.t) {
                Some(r) => row.extend([
                    source_name(r.decision.source).to_string(),
                    f(r.decision.w_p),
                    f(r.decision.w_q),
                    r.decision.basis_step.map(|b| b.to_string()).unwrap_or_default(),
                    r.decision.rejection_driven.to_string(),
                    opt(r.fused_mae),
                ]),
                None => row.extend(std::iter::repeat(String::new()).take(6)),
            }
            row
        });
        self.csv("steps.csv", &header, rows)
    }

    pub fn write_summary(&mut self, summary: &SelectionSummary, benchmark: &Benchmark) -> Result<()> {
        #[derive(Serialize)]
        struct Doc<'a> {
            summary: &'a SelectionSummary,
            deviation_from_p: f64,
            deviation_from_q: f64,
            benchmark: &'a Benchmark,
        }
        self.json(
            "summary.json",
            &Doc {
                summary,
                deviation_from_p: summary.deviation_from_p(),
                deviation_from_q: summary.deviation_from_q(),
                benchmark,
            },
        )
    }

    pub fn write_benchmark(&mut self, benchmark: &Benchmark) -> Result<()> {
        self.json("bench.json", benchmark)
    }

    /// Long-format sweep table and one heatmap per strategy. An empty sweep
    /// writes nothing.
    pub fn write_sweep(&mut self, outcome: &SweepOutcome, config: &RunConfig) -> Result<()> {
        if outcome.rows.is_empty() {
            return Ok(());
        }
        let header = [
            "lambda",
            "window",
            "window_label",
            "strategy",
            "average_score",
            "deviation_from_p",
            "deviation_from_q",
            "improvement",
            "fraction_better_selected",
            "steps_scored",
            "warmup_steps",
            "first_decision_step",
            "first_decision_rejection_driven",
            "excluded",
        ];
        let rows = outcome.rows.iter().map(|r| {
            let s = &r.summary;
            vec![
                f(r.lambda),
                r.window.to_string(),
                format_duration(r.window),
                r.strategy.name().to_string(),
                f(s.average_score),
                f(s.deviation_from_p()),
                f(s.deviation_from_q()),
                f(r.improvement()),
                f(s.fraction_better_selected),
                s.steps_scored.to_string(),
                s.warmup_steps.to_string(),
                s.first_decision_step.map(|t| t.to_string()).unwrap_or_default(),
                s.first_decision_rejection_driven.to_string(),
                r.excluded.to_string(),
            ]
        });
        self.csv("sweep.csv", &header, rows)?;

        let strategies: Vec<Strategy> = config.strategies.clone();
        for strategy in strategies {
            let matrix = heatmap(outcome, &config.windows, &config.lambdas, strategy);
            let mut header = vec!["window".to_string()];
            header.extend(config.lambdas.iter().map(|l| f(*l)));
            let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
            let rows = config.windows.iter().zip(matrix).map(|(w, cells)| {
                let mut row = vec![w.to_string()];
                row.extend(cells.into_iter().map(opt));
                row
            });
            self.csv(&format!("heatmap_{}.csv", strategy.name()), &header_refs, rows)?;
        }
        Ok(())
    }

    pub fn write_validation(&mut self, report: &ValidationReport) -> Result<()> {
        self.json("validation.json", report)
    }

    /// Wall-clock timings, kept apart so the other files stay reproducible.
    pub fn write_runtime(&mut self, rows: &[(f64, usize, Strategy, f64)]) -> Result<()> {
        if rows.is_empty() {
            return Ok(());
        }
        let rows = rows
            .iter()
            .map(|(l, w, s, secs)| vec![f(*l), w.to_string(), s.name().to_string(), f(*secs)]);
        self.csv(
            "runtime.csv",
            &["lambda", "window", "strategy", "runtime_seconds"],
            rows,
        )
    }

    /// Writes `metadata.json` (always last, listing the other files).
    pub fn finish(mut self) -> Result<PathBuf> {
        let mut meta = self.metadata.clone();
        meta.files.push("metadata.json".to_string());
        let (path, mut out) = self.open("metadata.json")?;
        serde_json::to_writer_pretty(&mut out, &meta).map_err(|e| HarnessError::Format {
            path: path.clone(),
            message: e.to_string(),
        })?;
        writeln!(out)
            .and_then(|_| out.flush())
            .map_err(|e| HarnessError::io(&path, e))?;
        Ok(self.dir)
    }
}
