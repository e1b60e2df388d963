//! Monte Carlo validation plan: familywise error under both null generators
//! and simultaneous coverage on shifted streams, for every `(λ, ω)` of the
//! plan, with the deployed sliding-window procedure.
//!
//! ```text
//! FWER:     per-side crossing rate ≤ α/2 + 3·SE,   SE = √(α/2 (1 - α/2) / R)
//! coverage: all-t coverage        ≥ 1 - α - 3·SE,  SE = √(α (1 - α) / R)
//! ```

use eselect_core::validation::{
    coverage_from_outcomes, fwer_from_outcomes, run_replication_multi, Monitor, NullFamily, ReplicationOutcome,
    StreamKind, SyntheticStreamSpec, MIN_REPLICATIONS,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::sweep::with_pool;

/// Tolerance in standard errors.
pub const SE_MULTIPLIER: f64 = 3.0;

/// Shift used by the coverage streams (transformed scale).
pub const COVERAGE_SHIFT: f64 = 0.05;

/// Second null family: raw differences twice as spread as the transform scale.
pub const NORMAL_NULL_SCALE: f64 = 2.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationPlan {
    pub lambdas: Vec<f64>,
    pub windows: Vec<usize>,
    pub alpha: f64,
    pub length: usize,
    pub replications: usize,
    pub seed: u64,
    pub threads: Option<usize>,
}

impl ValidationPlan {
    pub fn null_generators() -> [(&'static str, NullFamily); 2] {
        [
            ("uniform", NullFamily::Uniform),
            (
                "transformed-normal",
                NullFamily::TransformedNormal {
                    scale_ratio: NORMAL_NULL_SCALE,
                },
            ),
        ]
    }

    pub fn coverage_streams(&self) -> [(&'static str, StreamKind); 2] {
        let third = self.length / 3;
        [
            ("constant-shift", StreamKind::ConstantShift { shift: COVERAGE_SHIFT }),
            (
                "regime-switch",
                StreamKind::RegimeSwitch {
                    switch_points: vec![third.max(2), (2 * third).max(3)],
                    means: vec![COVERAGE_SHIFT, -2.0 * COVERAGE_SHIFT, 0.0],
                },
            ),
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckKind {
    /// Per-side crossing rate of `H0(p,q)`.
    FwerPq,
    /// Per-side crossing rate of `H0(q,p)`.
    FwerQp,
    Coverage,
}

/// One checked quantity of the plan.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationCheck {
    pub kind: CheckKind,
    pub stream: String,
    pub lambda: f64,
    pub window: usize,
    pub rate: f64,
    pub se: f64,
    /// Upper bound (FWER) or lower bound (coverage) the rate is held to.
    pub bound: f64,
    pub pass: bool,
    pub replications: usize,
    pub low_power: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub alpha: f64,
    pub length: usize,
    pub replications: usize,
    pub seed: u64,
    pub se_multiplier: f64,
    pub checks: Vec<ValidationCheck>,
}

impl ValidationReport {
    pub fn failures(&self) -> impl Iterator<Item = &ValidationCheck> {
        self.checks.iter().filter(|c| !c.pass)
    }

    pub fn passed(&self) -> bool {
        self.failures().next().is_none()
    }
}

/// Runs `replications` of `spec`, all risk weights at once, in parallel.
/// Returns one outcome vector per weight, in replication order.
pub fn replicate(
    spec: &SyntheticStreamSpec,
    lambdas: &[f64],
    alpha: f64,
    monitor: Monitor,
) -> Result<Vec<Vec<ReplicationOutcome>>> {
    spec.validate()?;
    let per_rep: Vec<Vec<ReplicationOutcome>> = (0..spec.replications as u64)
        .into_par_iter()
        .map(|rep| run_replication_multi(spec, lambdas, alpha, monitor, rep))
        .collect::<eselect_core::Result<_>>()?;
    let mut by_lambda = vec![Vec::with_capacity(spec.replications); lambdas.len()];
    for outcomes in per_rep {
        for (k, o) in outcomes.into_iter().enumerate() {
            by_lambda[k].push(o);
        }
    }
    Ok(by_lambda)
}

/// Runs the familywise-error part of the plan.
pub fn fwer_checks(plan: &ValidationPlan) -> Result<Vec<ValidationCheck>> {
    let side = plan.alpha / 2.0;
    let mut checks = Vec::new();
    for (name, family) in ValidationPlan::null_generators() {
        for &window in &plan.windows {
            let spec = SyntheticStreamSpec {
                kind: StreamKind::NullSymmetric(family),
                length: plan.length,
                replications: plan.replications,
                seed: plan.seed,
            };
            let outcomes = with_pool(plan.threads, || {
                replicate(&spec, &plan.lambdas, plan.alpha, Monitor::Sliding { window })
            })?;
            for (&lambda, o) in plan.lambdas.iter().zip(&outcomes) {
                let est = fwer_from_outcomes(o);
                for (kind, rate) in [(CheckKind::FwerPq, est.pq), (CheckKind::FwerQp, est.qp)] {
                    let se = rate.se_at(side);
                    let bound = side + SE_MULTIPLIER * se;
                    checks.push(ValidationCheck {
                        kind,
                        stream: name.to_string(),
                        lambda,
                        window,
                        rate: rate.rate,
                        se,
                        bound,
                        pass: rate.rate <= bound,
                        replications: rate.replications,
                        low_power: rate.low_power,
                    });
                }
            }
        }
    }
    Ok(checks)
}

/// Runs the coverage part of the plan. `λ = 0` has no band and is skipped.
pub fn coverage_checks(plan: &ValidationPlan) -> Result<Vec<ValidationCheck>> {
    let lambdas: Vec<f64> = plan.lambdas.iter().copied().filter(|&l| l > 0.0).collect();
    let mut checks = Vec::new();
    for (name, kind) in plan.coverage_streams() {
        for &window in &plan.windows {
            let spec = SyntheticStreamSpec {
                kind: kind.clone(),
                length: plan.length,
                replications: plan.replications,
                seed: plan.seed.wrapping_add(1),
            };
            let outcomes = with_pool(plan.threads, || {
                replicate(&spec, &lambdas, plan.alpha, Monitor::Sliding { window })
            })?;
            for (&lambda, o) in lambdas.iter().zip(&outcomes) {
                let est = coverage_from_outcomes(o)?;
                let se = est.se_at(1.0 - plan.alpha);
                let bound = 1.0 - plan.alpha - SE_MULTIPLIER * se;
                checks.push(ValidationCheck {
                    kind: CheckKind::Coverage,
                    stream: name.to_string(),
                    lambda,
                    window,
                    rate: est.rate,
                    se,
                    bound,
                    pass: est.rate >= bound,
                    replications: est.replications,
                    low_power: est.low_power,
                });
            }
        }
    }
    Ok(checks)
}

/// Runs the whole plan.
pub fn run_plan(plan: &ValidationPlan) -> Result<ValidationReport> {
    let mut checks = fwer_checks(plan)?;
    checks.extend(coverage_checks(plan)?);
    Ok(ValidationReport {
        alpha: plan.alpha,
        length: plan.length,
        replications: plan.replications,
        seed: plan.seed,
        se_multiplier: SE_MULTIPLIER,
        checks,
    })
}

/// Whether the plan has enough replications for a meaningful rate.
pub fn is_low_power(replications: usize) -> bool {
    replications < MIN_REPLICATIONS
}
