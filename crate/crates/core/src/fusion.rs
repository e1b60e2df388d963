//! Turning test verdicts into a fused forecast.
//!
//! The decision for step `t` only looks at the verdict from step `t - lag`:
//! a rejection of `H0(q,p)` selects P, a rejection of `H0(p,q)` selects Q,
//! and otherwise one of three fallbacks applies (persist the previous choice,
//! sample by p-value weights, or average with those weights).

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;

use crate::error::{Error, Result};
use crate::savi::TestVerdict;
use crate::score::ForecastTriple;

/// Default decision lag: one day of 15-minute steps.
pub const DEFAULT_LAG: usize = 96;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Source {
    P,
    Q,
    Fused,
    Warmup,
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Source::P => "P",
            Source::Q => "Q",
            Source::Fused => "FUSED",
            Source::Warmup => "WARMUP",
        })
    }
}

/// One of the two candidate forecasts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Arm {
    #[default]
    P,
    Q,
}

impl Arm {
    pub fn source(self) -> Source {
        match self {
            Arm::P => Source::P,
            Arm::Q => Source::Q,
        }
    }

    fn weights(self) -> (f64, f64) {
        match self {
            Arm::P => (1.0, 0.0),
            Arm::Q => (0.0, 1.0),
        }
    }
}

impl FromStr for Arm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "p" | "P" => Ok(Arm::P),
            "q" | "Q" => Ok(Arm::Q),
            _ => Err(Error::InvalidParameter {
                name: "initial_arm",
                value: f64::NAN,
            }),
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Arm::P => "P",
            Arm::Q => "Q",
        })
    }
}

/// Fallback used when neither null is rejected at the basis step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Strategy {
    Persistence,
    Sampling,
    #[cfg_attr(feature = "serde", serde(rename = "wavg"))]
    WeightedAverage,
}

impl Strategy {
    pub const ALL: [Strategy; 3] = [Strategy::Persistence, Strategy::Sampling, Strategy::WeightedAverage];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Persistence => "persistence",
            Strategy::Sampling => "sampling",
            Strategy::WeightedAverage => "wavg",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "persistence" => Ok(Strategy::Persistence),
            "sampling" => Ok(Strategy::Sampling),
            "wavg" | "weighted-average" => Ok(Strategy::WeightedAverage),
            _ => Err(Error::InvalidParameter {
                name: "strategy",
                value: f64::NAN,
            }),
        }
    }
}

/// Sampling / averaging weights `w_p = (1 + 𝔭 - 𝔭*)/2`, `w_q = 1 - w_p`.
pub fn weights(p_value: f64, p_value_star: f64) -> Result<(f64, f64)> {
    for (name, v) in [("p_value", p_value), ("p_value_star", p_value_star)] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::InvalidParameter { name, value: v });
        }
    }
    let w_p = (1.0 + p_value - p_value_star) / 2.0;
    Ok((w_p, 1.0 - w_p))
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SelectionDecision {
    pub t: u64,
    pub source: Source,
    pub w_p: f64,
    pub w_q: f64,
    /// Step whose verdict drove this decision; `None` while warming up.
    pub basis_step: Option<u64>,
    pub strategy: Strategy,
    /// The decision came from a rejection rather than the fallback.
    pub rejection_driven: bool,
    /// Both nulls were rejected at the basis step.
    pub double_rejection: bool,
}

impl SelectionDecision {
    /// Placeholder before any verdict is available at the basis step.
    pub fn warmup(t: u64, strategy: Strategy) -> Self {
        Self {
            t,
            source: Source::Warmup,
            w_p: 0.5,
            w_q: 0.5,
            basis_step: None,
            strategy,
            rejection_driven: false,
            double_rejection: false,
        }
    }

    /// Decision used as `θ_0` by the persistence fallback.
    pub fn initial(arm: Arm, strategy: Strategy) -> Self {
        let (w_p, w_q) = arm.weights();
        Self {
            t: 0,
            source: arm.source(),
            w_p,
            w_q,
            basis_step: None,
            strategy,
            rejection_driven: false,
            double_rejection: false,
        }
    }

    /// The arm this decision leans towards, if any.
    pub fn leaning(&self) -> Option<Arm> {
        match self.source {
            Source::P => Some(Arm::P),
            Source::Q => Some(Arm::Q),
            Source::Fused if self.w_p > self.w_q => Some(Arm::P),
            Source::Fused if self.w_q > self.w_p => Some(Arm::Q),
            _ => None,
        }
    }
}

/// Decision for step `t` from the verdict at `basis_step`.
///
/// `initial` stands in for `prev` when the latter is not a P/Q choice.
/// The rng is only drawn from by the sampling fallback.
pub fn decide<R: Rng + ?Sized>(
    t: u64,
    basis_step: u64,
    verdict: &TestVerdict,
    prev: &SelectionDecision,
    initial: Arm,
    strategy: Strategy,
    rng: &mut R,
) -> Result<SelectionDecision> {
    let mut out = SelectionDecision {
        t,
        source: Source::Warmup,
        w_p: 0.5,
        w_q: 0.5,
        basis_step: Some(basis_step),
        strategy,
        rejection_driven: false,
        double_rejection: false,
    };

    let rejected = match (verdict.reject_h0_qp, verdict.reject_h0_pq) {
        (true, true) => {
            out.double_rejection = true;
            // larger evidence wins; E* backs P, E backs Q
            Some(if verdict.log_e_star >= verdict.log_e {
                Arm::P
            } else {
                Arm::Q
            })
        }
        (true, false) => Some(Arm::P),
        (false, true) => Some(Arm::Q),
        (false, false) => None,
    };
    if let Some(arm) = rejected {
        out.source = arm.source();
        (out.w_p, out.w_q) = arm.weights();
        out.rejection_driven = true;
        return Ok(out);
    }

    match strategy {
        Strategy::Persistence => {
            let arm = match prev.source {
                Source::P => Arm::P,
                Source::Q => Arm::Q,
                Source::Fused | Source::Warmup => initial,
            };
            out.source = arm.source();
            (out.w_p, out.w_q) = arm.weights();
        }
        Strategy::Sampling => {
            let (w_p, w_q) = weights(verdict.p_value, verdict.p_value_star)?;
            out.w_p = w_p;
            out.w_q = w_q;
            out.source = if rng.gen::<f64>() < w_p { Source::P } else { Source::Q };
        }
        Strategy::WeightedAverage => {
            let (w_p, w_q) = weights(verdict.p_value, verdict.p_value_star)?;
            out.w_p = w_p;
            out.w_q = w_q;
            out.source = if w_p >= 1.0 {
                Source::P
            } else if w_p <= 0.0 {
                Source::Q
            } else {
                Source::Fused
            };
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FusedForecast {
    pub t: u64,
    pub value: Vec<f64>,
    pub decision: SelectionDecision,
}

/// Builds `θ_t` from the decision: `p_t`, `q_t`, or `w_p p_t + w_q q_t`.
pub fn fuse(triple: &ForecastTriple, decision: &SelectionDecision) -> Result<FusedForecast> {
    if triple.p.len() != triple.q.len() {
        return Err(Error::ShapeMismatch {
            expected: triple.p.len(),
            found: triple.q.len(),
        });
    }
    if decision.t != triple.t {
        return Err(Error::Sequencing {
            previous: triple.t,
            requested: decision.t,
        });
    }
    let value = match decision.source {
        Source::P => triple.p.clone(),
        Source::Q => triple.q.clone(),
        Source::Fused => triple
            .p
            .iter()
            .zip(&triple.q)
            .map(|(p, q)| decision.w_p * p + decision.w_q * q)
            .collect(),
        Source::Warmup => {
            return Err(Error::InsufficientHistory {
                needed: 1,
                available: 0,
            })
        }
    };
    Ok(FusedForecast {
        t: triple.t,
        value,
        decision: *decision,
    })
}
