//! End-to-end selection over an ordered series of forecast triples.
//!
//! Evidence (scores, transform, sliding e-processes) depends only on
//! `(λ, ω, α)` and is computed once by [`compute_evidence`]; [`select`] then
//! runs a fusion strategy over it. [`run_selection`] chains the two.

use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fusion::{decide, fuse, Arm, SelectionDecision, Source, Strategy, DEFAULT_LAG};
use crate::savi::{confidence_band, ConfidenceBand, EProcessConfig, SlidingEProcess, TestVerdict, WarmupPolicy};
use crate::score::{mae, ForecastTriple};
use crate::transform::{calibrate_scale, TransformSpec, DEFAULT_CALIBRATION_LENGTH};

/// Parameters that shape the evidence stream.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EvidenceConfig {
    pub alpha: f64,
    pub lambda: f64,
    pub window: usize,
    pub calibration_length: usize,
    pub warmup: WarmupPolicy,
}

impl Default for EvidenceConfig {
    fn default() -> Self {
        Self {
            alpha: 0.05,
            lambda: 0.1,
            window: 672,
            calibration_length: DEFAULT_CALIBRATION_LENGTH,
            warmup: WarmupPolicy::Strict,
        }
    }
}

/// Parameters of the fusion step.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FusionConfig {
    pub strategy: Strategy,
    pub lag: usize,
    pub seed: u64,
    pub initial_arm: Arm,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::Persistence,
            lag: DEFAULT_LAG,
            seed: 0,
            initial_arm: Arm::P,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SelectionConfig {
    pub evidence: EvidenceConfig,
    pub fusion: FusionConfig,
}

/// Evidence at one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvidenceStep {
    pub t: u64,
    pub mae_p: f64,
    pub mae_q: f64,
    pub delta_hat: f64,
    pub delta_tilde: f64,
    /// Mean of the evaluated window, once one exists.
    pub rolling_mean: Option<f64>,
    pub v_hat: Option<f64>,
    pub verdict: Option<TestVerdict>,
    pub band: Option<ConfidenceBand>,
}

#[derive(Debug, Clone)]
pub struct EvidenceTrace {
    pub config: EvidenceConfig,
    pub transform: TransformSpec,
    pub steps: Vec<EvidenceStep>,
}

impl EvidenceTrace {
    /// First step of the selection region (everything after calibration).
    pub fn selection_start(&self) -> usize {
        self.config.calibration_length
    }
}

fn check_length(n: usize, evidence: &EvidenceConfig, lag: usize) -> Result<()> {
    let needed = evidence.calibration_length + evidence.window + lag;
    if n <= needed {
        return Err(Error::InsufficientLength { needed, available: n });
    }
    Ok(())
}

/// Scores every step, calibrates the transform on the leading stretch and
/// runs the sliding e-process pair over the whole transformed stream.
pub fn compute_evidence(config: &EvidenceConfig, triples: &[ForecastTriple]) -> Result<EvidenceTrace> {
    let eprocess = EProcessConfig::new(config.lambda, config.alpha)?;
    let mut sliding = SlidingEProcess::new(eprocess, config.window, config.warmup)?;

    let mut scores = Vec::with_capacity(triples.len());
    for triple in triples {
        let (mae_p, mae_q) = (triple.mae_p()?, triple.mae_q()?);
        scores.push((mae_p, mae_q, mae_p - mae_q));
    }
    let raw: Vec<f64> = scores.iter().map(|s| s.2).collect();
    let transform = calibrate_scale(&raw, config.calibration_length)?;

    let mut steps = Vec::with_capacity(triples.len());
    for (triple, &(mae_p, mae_q, delta_hat)) in triples.iter().zip(&scores) {
        let delta_tilde = transform.bound(delta_hat)?;
        let eval = sliding.push(delta_tilde)?;
        let band = match eval {
            Some(e) if config.lambda > 0.0 => Some(confidence_band(&e.state, e.mean(), triple.t, Some(&transform))?),
            _ => None,
        };
        steps.push(EvidenceStep {
            t: triple.t,
            mae_p,
            mae_q,
            delta_hat,
            delta_tilde,
            rolling_mean: eval.map(|e| e.mean()),
            v_hat: eval.map(|e| e.state.v_hat),
            verdict: eval.map(|e| e.verdict),
            band,
        });
    }
    Ok(EvidenceTrace {
        config: *config,
        transform,
        steps,
    })
}

/// Per-step output of a selection run. Only steps after calibration have one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub evidence: EvidenceStep,
    pub decision: SelectionDecision,
    /// MAE of the fused forecast; `None` for warm-up steps.
    pub fused_mae: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SelectionSummary {
    /// Steps after calibration.
    pub steps_total: usize,
    /// Steps with a non-warm-up decision; all averages below use these.
    pub steps_scored: usize,
    pub warmup_steps: usize,
    pub average_score: f64,
    pub baseline_p: f64,
    pub baseline_q: f64,
    pub oracle: f64,
    /// Share of scored steps whose choice (or heavier weight) is the
    /// strictly better forecast. Ties count for neither.
    pub fraction_better_selected: f64,
    pub first_decision_step: Option<u64>,
    /// The first non-warm-up decision came from a rejection.
    pub first_decision_rejection_driven: bool,
    pub rejection_steps: usize,
    pub double_rejections: usize,
    pub switches: usize,
}

impl SelectionSummary {
    pub fn deviation_from_p(&self) -> f64 {
        self.baseline_p - self.average_score
    }

    pub fn deviation_from_q(&self) -> f64 {
        self.baseline_q - self.average_score
    }
}

#[derive(Debug, Clone)]
pub struct SelectionRun {
    pub transform: TransformSpec,
    pub records: Vec<StepRecord>,
    pub summary: SelectionSummary,
}

/// Runs a fusion strategy over precomputed evidence.
///
/// The decision at position `i` reads the verdict at `i - lag` and nothing
/// later. Steps inside the calibration stretch get no record.
pub fn select(trace: &EvidenceTrace, triples: &[ForecastTriple], fusion: &FusionConfig) -> Result<SelectionRun> {
    if trace.steps.len() != triples.len() {
        return Err(Error::ShapeMismatch {
            expected: trace.steps.len(),
            found: triples.len(),
        });
    }
    check_length(triples.len(), &trace.config, fusion.lag)?;
    let mut rng = ChaCha8Rng::seed_from_u64(fusion.seed);
    let start = trace.selection_start();
    let mut prev = SelectionDecision::initial(fusion.initial_arm, fusion.strategy);
    let mut records = Vec::with_capacity(triples.len() - start);

    let mut summary = SelectionSummary {
        steps_total: triples.len() - start,
        ..Default::default()
    };
    let (mut fused_sum, mut p_sum, mut q_sum, mut oracle_sum) = (0.0, 0.0, 0.0, 0.0);
    let mut better = 0usize;
    let mut last_arm: Option<Arm> = None;

    for i in start..triples.len() {
        let step = trace.steps[i];
        let triple = &triples[i];
        let basis = i
            .checked_sub(fusion.lag)
            .and_then(|j| trace.steps[j].verdict.map(|v| (j, v)));
        let decision = match basis {
            Some((j, verdict)) => decide(
                step.t,
                trace.steps[j].t,
                &verdict,
                &prev,
                fusion.initial_arm,
                fusion.strategy,
                &mut rng,
            )?,
            None => SelectionDecision::warmup(step.t, fusion.strategy),
        };

        let fused_mae = if decision.source == Source::Warmup {
            summary.warmup_steps += 1;
            None
        } else {
            let fused = fuse(triple, &decision)?;
            let score = mae(&fused.value, &triple.y)?;
            summary.steps_scored += 1;
            fused_sum += score;
            p_sum += step.mae_p;
            q_sum += step.mae_q;
            oracle_sum += step.mae_p.min(step.mae_q);
            let strictly_better = if step.mae_p < step.mae_q {
                Some(Arm::P)
            } else if step.mae_q < step.mae_p {
                Some(Arm::Q)
            } else {
                None
            };
            if strictly_better.is_some() && decision.leaning() == strictly_better {
                better += 1;
            }
            if summary.first_decision_step.is_none() {
                summary.first_decision_step = Some(step.t);
                summary.first_decision_rejection_driven = decision.rejection_driven;
            }
            if decision.rejection_driven {
                summary.rejection_steps += 1;
            }
            if decision.double_rejection {
                summary.double_rejections += 1;
            }
            let arm = decision.leaning();
            if arm.is_some() && last_arm.is_some() && arm != last_arm {
                summary.switches += 1;
            }
            if arm.is_some() {
                last_arm = arm;
            }
            Some(score)
        };

        records.push(StepRecord {
            evidence: step,
            decision,
            fused_mae,
        });
        prev = decision;
    }

    if summary.steps_scored > 0 {
        let n = summary.steps_scored as f64;
        summary.average_score = fused_sum / n;
        summary.baseline_p = p_sum / n;
        summary.baseline_q = q_sum / n;
        summary.oracle = oracle_sum / n;
        summary.fraction_better_selected = better as f64 / n;
    } else {
        summary.average_score = f64::NAN;
        summary.baseline_p = f64::NAN;
        summary.baseline_q = f64::NAN;
        summary.oracle = f64::NAN;
        summary.fraction_better_selected = f64::NAN;
    }

    Ok(SelectionRun {
        transform: trace.transform,
        records,
        summary,
    })
}

/// Full procedure: evidence, tests and fusion at every step.
pub fn run_selection(config: &SelectionConfig, triples: &[ForecastTriple]) -> Result<SelectionRun> {
    check_length(triples.len(), &config.evidence, config.fusion.lag)?;
    let trace = compute_evidence(&config.evidence, triples)?;
    select(&trace, triples, &config.fusion)
}

/// Average scores of the two inputs and of the per-step best choice.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Benchmark {
    pub oracle: f64,
    pub baseline_p: f64,
    pub baseline_q: f64,
    pub steps: usize,
}

/// Oracle and baseline scores over the steps after `calibration_length`.
pub fn oracle_benchmark(triples: &[ForecastTriple], calibration_length: usize) -> Result<Benchmark> {
    if triples.len() <= calibration_length {
        return Err(Error::InsufficientLength {
            needed: calibration_length,
            available: triples.len(),
        });
    }
    let region = &triples[calibration_length..];
    let (mut oracle, mut p, mut q) = (0.0, 0.0, 0.0);
    for triple in region {
        let (mp, mq) = (triple.mae_p()?, triple.mae_q()?);
        oracle += mp.min(mq);
        p += mp;
        q += mq;
    }
    let n = region.len() as f64;
    Ok(Benchmark {
        oracle: oracle / n,
        baseline_p: p / n,
        baseline_q: q / n,
        steps: region.len(),
    })
}
