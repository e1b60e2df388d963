//! Grid sweep over `(λ, ω)` and the fusion strategies.
//!
//! Each `(λ, ω)` cell computes its evidence once and runs every requested
//! strategy on it. Cells are independent and run on the rayon pool; results
//! come back in grid order (ω outer, λ inner, strategy innermost) whatever
//! the degree of parallelism.

use std::time::Instant;

use eselect_core::{compute_evidence, oracle_benchmark, select, Benchmark, ForecastTriple, SelectionSummary, Strategy};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::RunConfig;
use crate::error::Result;

/// Exclusion rule applied to every strategy, recorded in run metadata.
pub const EXCLUSION_RULE: &str =
    "excluded when the first scored decision (after calibration and warmup) is not driven by a rejection";

/// One `(λ, ω, strategy)` result.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub window: usize,
    pub strategy: Strategy,
    pub summary: SelectionSummary,
    pub excluded: bool,
    /// Wall-clock seconds: the cell's evidence pass plus this strategy's selection.
    pub runtime_seconds: f64,
}

impl SweepRow {
    /// Better baseline minus the fused average: positive means the fusion
    /// improved on both inputs.
    pub fn improvement(&self) -> f64 {
        self.summary.baseline_p.min(self.summary.baseline_q) - self.summary.average_score
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    pub benchmark: Benchmark,
    /// Calibrated scale of the transform (identical for every cell).
    pub sigma: f64,
}

impl SweepOutcome {
    /// Rows of one strategy, in grid order.
    pub fn rows_for(&self, strategy: Strategy) -> impl Iterator<Item = &SweepRow> {
        self.rows.iter().filter(move |r| r.strategy == strategy)
    }

    /// Among non-excluded cells of `strategy`, the fraction that beat the
    /// better baseline, and the number of such cells.
    pub fn improvement_rate(&self, strategy: Strategy) -> (f64, usize) {
        let kept: Vec<_> = self.rows_for(strategy).filter(|r| !r.excluded).collect();
        let better = kept.iter().filter(|r| r.improvement() > 0.0).count();
        let rate = if kept.is_empty() {
            f64::NAN
        } else {
            better as f64 / kept.len() as f64
        };
        (rate, kept.len())
    }

    /// Best (lowest average score) non-excluded cell of `strategy`.
    pub fn best(&self, strategy: Strategy) -> Option<&SweepRow> {
        self.rows_for(strategy)
            .filter(|r| !r.excluded)
            .min_by(|a, b| a.summary.average_score.total_cmp(&b.summary.average_score))
    }
}

/// Runs every grid cell of `config` on `triples`.
pub fn run_sweep(config: &RunConfig, triples: &[ForecastTriple]) -> Result<SweepOutcome> {
    let cells: Vec<(usize, f64)> = config
        .windows
        .iter()
        .flat_map(|&w| config.lambdas.iter().map(move |&l| (w, l)))
        .collect();
    let run_cell = |&(window, lambda): &(usize, f64)| -> Result<(f64, Vec<SweepRow>)> {
        let start = Instant::now();
        let trace = compute_evidence(&config.evidence(lambda, window), triples)?;
        let evidence_time = start.elapsed().as_secs_f64();
        let mut rows = Vec::with_capacity(config.strategies.len());
        for &strategy in &config.strategies {
            let start = Instant::now();
            let run = select(&trace, triples, &config.fusion(strategy))?;
            let runtime_seconds = evidence_time + start.elapsed().as_secs_f64();
            let excluded = !run.summary.first_decision_rejection_driven;
            rows.push(SweepRow {
                lambda,
                window,
                strategy,
                summary: run.summary,
                excluded,
                runtime_seconds,
            });
        }
        Ok((trace.transform.sigma(), rows))
    };
    let results: Vec<(f64, Vec<SweepRow>)> = with_pool(config.threads, || {
        cells.par_iter().map(run_cell).collect::<Result<Vec<_>>>()
    })?;
    let sigma = results.first().map_or(f64::NAN, |r| r.0);
    Ok(SweepOutcome {
        rows: results.into_iter().flat_map(|r| r.1).collect(),
        benchmark: oracle_benchmark(triples, config.calibration_length)?,
        sigma,
    })
}

/// Runs `f` on a dedicated pool of `threads` workers, or on the global pool.
pub fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

/// `(ω × λ)` improvement matrix for `strategy`; excluded cells are `None`.
pub fn heatmap(
    outcome: &SweepOutcome,
    windows: &[usize],
    lambdas: &[f64],
    strategy: Strategy,
) -> Vec<Vec<Option<f64>>> {
    windows
        .iter()
        .map(|&w| {
            lambdas
                .iter()
                .map(|&l| {
                    outcome
                        .rows_for(strategy)
                        .find(|r| r.window == w && r.lambda == l)
                        .filter(|r| !r.excluded)
                        .map(SweepRow::improvement)
                })
                .collect()
        })
        .collect()
}
