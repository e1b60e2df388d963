//! The four subcommands as library functions: `run`, `sweep`, `validate`,
//! `bench`. Each writes its files into the configured output directory and
//! returns what it computed.

use std::path::PathBuf;

use eselect_core::{compute_evidence, oracle_benchmark, select, Benchmark, SelectionRun};

use crate::config::RunConfig;
use crate::error::{HarnessError, Result};
use crate::ingest::{read_dataset, Dataset};
use crate::report::{InputFacts, Metadata, ReportWriter};
use crate::sweep::{run_sweep, SweepOutcome};
use crate::validate::{run_plan, ValidationPlan, ValidationReport};

fn load(config: &RunConfig) -> Result<Dataset> {
    let path = config.input()?;
    let data = read_dataset(path)?;
    if data.is_empty() {
        return Err(HarnessError::Format {
            path: path.to_path_buf(),
            message: "no rows with outcomes".into(),
        });
    }
    Ok(data)
}

fn writer(command: &str, config: &RunConfig, data: Option<&Dataset>) -> Result<ReportWriter> {
    let mut meta = Metadata::new(command, config);
    meta.input = data.map(|d| InputFacts::from_dataset(config.input.as_deref(), d));
    ReportWriter::create(&config.output_dir, meta)
}

/// Result of a single run.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub run: SelectionRun,
    pub benchmark: Benchmark,
    pub dir: PathBuf,
}

/// One configuration, full per-step output.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    let selection = config.single()?;
    let data = load(config)?;
    let started = std::time::Instant::now();
    let trace = compute_evidence(&selection.evidence, &data.triples)?;
    let run = select(&trace, &data.triples, &selection.fusion)?;
    let runtime = started.elapsed().as_secs_f64();
    let benchmark = oracle_benchmark(&data.triples, config.calibration_length)?;

    let mut out = writer("run", config, Some(&data))?;
    out.metadata_mut().sigma = Some(run.transform.sigma());
    out.write_steps(&trace, &run)?;
    out.write_summary(&run.summary, &benchmark)?;
    out.write_runtime(&[(
        selection.evidence.lambda,
        selection.evidence.window,
        selection.fusion.strategy,
        runtime,
    )])?;
    let dir = out.finish()?;
    Ok(RunOutput { run, benchmark, dir })
}

/// Grid sweep with sweep table, heatmaps and runtimes.
pub fn sweep(config: &RunConfig) -> Result<(SweepOutcome, PathBuf)> {
    let data = load(config)?;
    let outcome = run_sweep(config, &data.triples)?;
    let mut out = writer("sweep", config, Some(&data))?;
    if outcome.sigma.is_finite() {
        out.metadata_mut().sigma = Some(outcome.sigma);
    }
    out.write_sweep(&outcome, config)?;
    let timings: Vec<_> = outcome
        .rows
        .iter()
        .map(|r| (r.lambda, r.window, r.strategy, r.runtime_seconds))
        .collect();
    out.write_runtime(&timings)?;
    let dir = out.finish()?;
    Ok((outcome, dir))
}

/// Oracle and baseline scores over the post-calibration region.
pub fn bench(config: &RunConfig) -> Result<(Benchmark, PathBuf)> {
    let data = load(config)?;
    let benchmark = oracle_benchmark(&data.triples, config.calibration_length)?;
    let mut out = writer("bench", config, Some(&data))?;
    out.write_benchmark(&benchmark)?;
    let dir = out.finish()?;
    Ok((benchmark, dir))
}

/// The validation plan of `config`.
pub fn plan(config: &RunConfig) -> ValidationPlan {
    ValidationPlan {
        lambdas: config.lambdas.clone(),
        windows: config.windows.clone(),
        alpha: config.alpha,
        length: config.length,
        replications: config.replications,
        seed: config.seed,
        threads: config.threads,
    }
}

/// Monte Carlo validation. The report is written even when checks fail;
/// the caller decides the exit status from [`ValidationReport::passed`].
pub fn validate(config: &RunConfig) -> Result<(ValidationReport, PathBuf)> {
    let report = run_plan(&plan(config))?;
    let mut out = writer("validate", config, None)?;
    out.write_validation(&report)?;
    let dir = out.finish()?;
    Ok((report, dir))
}
