//! E-processes for sequential superiority tests between two forecasts.
//!
//! For transformed score differences `δ_i ∈ [-1/2, 1/2]` observed since a
//! window anchor, with running mean `Δ_n` (and `Δ_0 = 0`):
//!
//! ```text
//! V_n   = Σ_{i≤n} (δ_i - Δ_{i-1})²
//! ψ_E(λ) = -ln(1 - λ) - λ
//! E_n   = exp( λ Σ δ_i - ψ_E(λ) V_n)      tests H0(p,q): Δ ≤ 0
//! E*_n  = exp(-λ Σ δ_i - ψ_E(λ) V_n)      tests H0(q,p): Δ ≥ 0
//! ```
//!
//! Each side runs at level `α/2`, so a null is rejected once its e-value
//! reaches `2/α`. The matching confidence sequence is
//! `Δ_n ± (ψ_E(λ) V_n - ln(α/2)) / (λ n)`.
//!
//! Everything is kept in log space; long favorable stretches push `E` far
//! past `f64::MAX`.

use alloc::collections::VecDeque;

use crate::error::{Error, Result};
use crate::transform::TransformSpec;

/// Sub-exponential ψ-function `-ln(1 - λ) - λ` on `[0, 1)`.
pub fn psi_e(lambda: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: lambda,
        });
    }
    Ok(-libm::log1p(-lambda) - lambda)
}

/// Sub-gaussian ψ-function `λ²/2`. Not used by the decision path.
pub fn psi_n(lambda: f64) -> f64 {
    0.5 * lambda * lambda
}

/// One increment of the variance process.
#[inline]
pub fn variance_increment(delta: f64, prev_mean: f64) -> f64 {
    let d = delta - prev_mean;
    d * d
}

/// `v_hat + (delta - prev_mean)²`.
pub fn update_variance(v_hat: f64, delta: f64, prev_mean: f64) -> f64 {
    v_hat + variance_increment(delta, prev_mean)
}

fn check_delta(delta: f64) -> Result<()> {
    if delta.abs() <= 0.5 {
        Ok(())
    } else {
        Err(Error::OutOfRange { value: delta })
    }
}

/// Risk weight `λ` and familywise level `α` of a test pair.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EProcessConfig {
    lambda: f64,
    alpha: f64,
    psi: f64,
    log_threshold: f64,
}

impl EProcessConfig {
    pub fn new(lambda: f64, alpha: f64) -> Result<Self> {
        let psi = psi_e(lambda)?;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter {
                name: "alpha",
                value: alpha,
            });
        }
        Ok(Self {
            lambda,
            alpha,
            psi,
            log_threshold: libm::log(2.0 / alpha),
        })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// `ψ_E(λ)`.
    pub fn psi(&self) -> f64 {
        self.psi
    }

    /// `ln(2/α)`: each one-sided test runs at level `α/2`.
    pub fn log_threshold(&self) -> f64 {
        self.log_threshold
    }
}

/// State of the e-process pair since `window_anchor`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EProcessState {
    pub log_e: f64,
    pub log_e_star: f64,
    pub v_hat: f64,
    pub window_anchor: u64,
    sum: f64,
    count: usize,
    config: EProcessConfig,
}

impl EProcessState {
    /// Fresh state: `E = E* = 1`.
    pub fn new(config: EProcessConfig, window_anchor: u64) -> Self {
        Self {
            log_e: 0.0,
            log_e_star: 0.0,
            v_hat: 0.0,
            window_anchor,
            sum: 0.0,
            count: 0,
            config,
        }
    }

    pub fn config(&self) -> &EProcessConfig {
        &self.config
    }

    /// In-window observation count `n`.
    pub fn count(&self) -> usize {
        self.count
    }

    /// Running sum `n Δ_n` of the in-window differences.
    pub fn sum(&self) -> f64 {
        self.sum
    }

    /// Running mean `Δ_n`, zero before the first observation.
    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    /// Successor state after observing `delta`.
    pub fn update(self, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(self.update_unchecked(delta))
    }

    #[inline]
    pub(crate) fn update_unchecked(mut self, delta: f64) -> Self {
        self.v_hat = update_variance(self.v_hat, delta, self.mean());
        self.sum += delta;
        self.count += 1;
        let lambda = self.config.lambda;
        let penalty = self.config.psi * self.v_hat;
        self.log_e = lambda * self.sum - penalty;
        self.log_e_star = -lambda * self.sum - penalty;
        self
    }

    /// Clears all in-window accumulators and moves the anchor forward.
    pub fn restart(self, anchor: u64) -> Result<Self> {
        if anchor <= self.window_anchor {
            return Err(Error::Sequencing {
                previous: self.window_anchor,
                requested: anchor,
            });
        }
        Ok(Self::new(self.config, anchor))
    }

    /// `E`, possibly `+inf` once beyond `f64` range.
    pub fn e_value(&self) -> f64 {
        libm::exp(self.log_e)
    }

    pub fn e_value_star(&self) -> f64 {
        libm::exp(self.log_e_star)
    }

    pub fn test(&self) -> TestVerdict {
        test(self)
    }
}

/// Evaluates a window from scratch: fresh state at `anchor` folded over `deltas`.
pub fn evaluate_window(config: EProcessConfig, anchor: u64, deltas: &[f64]) -> Result<EProcessState> {
    deltas
        .iter()
        .try_fold(EProcessState::new(config, anchor), |s, &d| s.update(d))
}

/// Outcome of the two one-sided tests at a single step.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TestVerdict {
    /// `H0(p,q)` rejected: Q is superior.
    pub reject_h0_pq: bool,
    /// `H0(q,p)` rejected: P is superior.
    pub reject_h0_qp: bool,
    pub p_value: f64,
    pub p_value_star: f64,
    pub log_e: f64,
    pub log_e_star: f64,
}

impl TestVerdict {
    /// Verdict for raw log e-values at level `alpha`.
    pub fn from_log_values(log_e: f64, log_e_star: f64, alpha: f64) -> Self {
        let threshold = libm::log(2.0 / alpha);
        Self::with_threshold(log_e, log_e_star, threshold)
    }

    fn with_threshold(log_e: f64, log_e_star: f64, log_threshold: f64) -> Self {
        Self {
            reject_h0_pq: log_e >= log_threshold,
            reject_h0_qp: log_e_star >= log_threshold,
            p_value: p_value(log_e),
            p_value_star: p_value(log_e_star),
            log_e,
            log_e_star,
        }
    }

    /// Swaps the roles of P and Q.
    pub fn swapped(&self) -> Self {
        Self {
            reject_h0_pq: self.reject_h0_qp,
            reject_h0_qp: self.reject_h0_pq,
            p_value: self.p_value_star,
            p_value_star: self.p_value,
            log_e: self.log_e_star,
            log_e_star: self.log_e,
        }
    }
}

/// Anytime-valid p-value `min(1, 1/E)`.
pub fn p_value(log_e: f64) -> f64 {
    if log_e <= 0.0 {
        1.0
    } else {
        libm::exp(-log_e)
    }
}

pub fn test(state: &EProcessState) -> TestVerdict {
    TestVerdict::with_threshold(state.log_e, state.log_e_star, state.config.log_threshold)
}

/// Time-uniform band for the average differential.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfidenceBand {
    pub t: u64,
    pub lower: f64,
    pub upper: f64,
    /// Back-transformed bounds; `None` where the transformed bound leaves
    /// `(-1/2, 1/2)` and the inverse diverges.
    pub lower_watts: Option<f64>,
    pub upper_watts: Option<f64>,
}

impl ConfidenceBand {
    pub fn half_width(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }

    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// Uniform boundary `u_{α/2} = (ψ_E(λ) V - ln(α/2)) / λ`.
pub fn uniform_boundary(config: &EProcessConfig, v_hat: f64) -> Result<f64> {
    if config.lambda == 0.0 {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: 0.0,
        });
    }
    Ok((config.psi * v_hat - libm::log(config.alpha / 2.0)) / config.lambda)
}

/// Band `mean ± u_{α/2}/n` around the supplied average differential.
pub fn confidence_band(
    state: &EProcessState,
    mean: f64,
    t: u64,
    spec: Option<&TransformSpec>,
) -> Result<ConfidenceBand> {
    if state.count == 0 {
        return Err(Error::InsufficientHistory {
            needed: 1,
            available: 0,
        });
    }
    let half = uniform_boundary(&state.config, state.v_hat)? / state.count as f64;
    let (lower, upper) = (mean - half, mean + half);
    let back = |x: f64| spec.and_then(|s| s.unbound(x).ok());
    Ok(ConfidenceBand {
        t,
        lower,
        upper,
        lower_watts: back(lower),
        upper_watts: back(upper),
    })
}

/// How the evaluation window behaves before `window` observations exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum WarmupPolicy {
    /// No evaluation until the window is full.
    #[default]
    Strict,
    /// Evaluate over all observations so far until the window fills.
    Expanding,
}

/// Sufficient statistics of one window: `n`, `Σ δ` and `V`.
///
/// They do not depend on `λ`, so one pass serves any number of risk weights.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WindowMoments {
    pub count: usize,
    pub sum: f64,
    pub v_hat: f64,
}

impl WindowMoments {
    /// Accumulates a window from its first observation (`Δ_0 = 0`).
    #[inline]
    pub fn of(deltas: &[f64]) -> Self {
        let mut sum = 0.0;
        let mut v_hat = 0.0;
        for (k, &d) in deltas.iter().enumerate() {
            let prev_mean = if k == 0 { 0.0 } else { sum / k as f64 };
            let r = d - prev_mean;
            v_hat += r * r;
            sum += d;
        }
        Self {
            count: deltas.len(),
            sum,
            v_hat,
        }
    }

    /// Adds one observation at the end of the window.
    #[inline]
    pub fn push(&mut self, d: f64) {
        let prev_mean = if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        };
        self.v_hat = update_variance(self.v_hat, d, prev_mean);
        self.sum += d;
        self.count += 1;
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            self.sum / self.count as f64
        }
    }

    /// `(ln E, ln E*)` for the given configuration.
    #[inline]
    pub fn log_values(&self, config: &EProcessConfig) -> (f64, f64) {
        let penalty = config.psi * self.v_hat;
        (config.lambda * self.sum - penalty, -config.lambda * self.sum - penalty)
    }
}

impl EProcessState {
    /// State for a window summarised by `moments`.
    pub fn from_moments(config: EProcessConfig, window_anchor: u64, moments: WindowMoments) -> Self {
        let (log_e, log_e_star) = moments.log_values(&config);
        Self {
            log_e,
            log_e_star,
            v_hat: moments.v_hat,
            window_anchor,
            sum: moments.sum,
            count: moments.count,
            config,
        }
    }
}

/// One evaluated window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowEvaluation {
    pub state: EProcessState,
    pub verdict: TestVerdict,
}

impl WindowEvaluation {
    /// Rolling mean of the evaluated window.
    pub fn mean(&self) -> f64 {
        self.state.mean()
    }
}

/// Sliding-window e-process: at step `t` the state covers exactly steps
/// `t - ω + 1 ..= t`, recomputed from a fresh anchor each step (O(ω)).
#[derive(Debug, Clone)]
pub struct SlidingEProcess {
    config: EProcessConfig,
    window: usize,
    policy: WarmupPolicy,
    buf: VecDeque<f64>,
    steps: u64,
}

impl SlidingEProcess {
    pub fn new(config: EProcessConfig, window: usize, policy: WarmupPolicy) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidParameter {
                name: "window",
                value: 0.0,
            });
        }
        Ok(Self {
            config,
            window,
            policy,
            buf: VecDeque::with_capacity(window),
            steps: 0,
        })
    }

    pub fn config(&self) -> &EProcessConfig {
        &self.config
    }

    pub fn window(&self) -> usize {
        self.window
    }

    /// Number of observations pushed so far; steps are numbered from 1.
    pub fn steps(&self) -> u64 {
        self.steps
    }

    /// Appends `delta` and evaluates the window ending at it, or returns
    /// `None` while warming up under [`WarmupPolicy::Strict`].
    pub fn push(&mut self, delta: f64) -> Result<Option<WindowEvaluation>> {
        check_delta(delta)?;
        if self.buf.len() == self.window {
            self.buf.pop_front();
        }
        self.buf.push_back(delta);
        self.steps += 1;
        if self.buf.len() < self.window && self.policy == WarmupPolicy::Strict {
            return Ok(None);
        }
        let anchor = self.steps + 1 - self.buf.len() as u64;
        let moments = WindowMoments::of(self.buf.make_contiguous());
        let state = EProcessState::from_moments(self.config, anchor, moments);
        Ok(Some(WindowEvaluation {
            state,
            verdict: test(&state),
        }))
    }
}
