//! Monte Carlo checks of the test guarantees on synthetic evidence streams.
//!
//! Replications are independent: replication `r` draws from a ChaCha stream
//! keyed by `(seed, r)`, so results do not depend on execution order and a
//! caller may run replications in parallel and aggregate afterwards with the
//! `*_from_outcomes` functions.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::savi::{uniform_boundary, EProcessConfig, WindowMoments};
use crate::transform::centered_normal_cdf;

/// Below this many replications results carry a low-power flag.
pub const MIN_REPLICATIONS: usize = 100;

/// Zero-mean generators used as the null.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum NullFamily {
    /// `δ ~ U[-1/2, 1/2]`.
    Uniform,
    /// `δ = Φ(X) - 1/2` with `X ~ N(0, ratio²)`: raw normal differences
    /// pushed through the bounding transform at unit scale. `ratio = 1`
    /// reproduces the uniform law, so pick something else.
    TransformedNormal { scale_ratio: f64 },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum StreamKind {
    NullSymmetric(NullFamily),
    /// `δ = shift + (1/2 - |shift|) U`, `U ~ U[-1, 1]`.
    ConstantShift {
        shift: f64,
    },
    /// Piecewise constant means; regime `k` runs from `switch_points[k-1]`
    /// (1-based step, inclusive) and has mean `means[k]`.
    RegimeSwitch {
        switch_points: Vec<usize>,
        means: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SyntheticStreamSpec {
    pub kind: StreamKind,
    pub length: usize,
    pub replications: usize,
    pub seed: u64,
}

fn check_mean(m: f64) -> Result<()> {
    if m.abs() < 0.5 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "shift",
            value: m,
        })
    }
}

impl SyntheticStreamSpec {
    pub fn validate(&self) -> Result<()> {
        if self.length == 0 {
            return Err(Error::InvalidParameter {
                name: "length",
                value: 0.0,
            });
        }
        match &self.kind {
            StreamKind::NullSymmetric(NullFamily::TransformedNormal { scale_ratio }) => {
                if !(scale_ratio.is_finite() && *scale_ratio > 0.0) {
                    return Err(Error::InvalidParameter {
                        name: "scale_ratio",
                        value: *scale_ratio,
                    });
                }
            }
            StreamKind::NullSymmetric(NullFamily::Uniform) => {}
            StreamKind::ConstantShift { shift } => check_mean(*shift)?,
            StreamKind::RegimeSwitch { switch_points, means } => {
                if means.len() != switch_points.len() + 1 {
                    return Err(Error::ShapeMismatch {
                        expected: switch_points.len() + 1,
                        found: means.len(),
                    });
                }
                for m in means {
                    check_mean(*m)?;
                }
                let mut prev = 1;
                for &s in switch_points {
                    if s <= prev || s > self.length {
                        return Err(Error::InvalidParameter {
                            name: "switch_points",
                            value: s as f64,
                        });
                    }
                    prev = s;
                }
            }
        }
        Ok(())
    }

    /// Conditional means per step.
    pub fn means(&self) -> Vec<f64> {
        match &self.kind {
            StreamKind::NullSymmetric(_) => alloc::vec![0.0; self.length],
            StreamKind::ConstantShift { shift } => alloc::vec![*shift; self.length],
            StreamKind::RegimeSwitch { switch_points, means } => {
                let mut out = Vec::with_capacity(self.length);
                let mut regime = 0;
                for t in 1..=self.length {
                    while regime < switch_points.len() && t >= switch_points[regime] {
                        regime += 1;
                    }
                    out.push(means[regime]);
                }
                out
            }
        }
    }

    /// Whether every conditional mean is zero (a true null for both sides).
    pub fn is_null(&self) -> bool {
        match &self.kind {
            StreamKind::NullSymmetric(_) => true,
            StreamKind::ConstantShift { shift } => *shift == 0.0,
            StreamKind::RegimeSwitch { means, .. } => means.iter().all(|m| *m == 0.0),
        }
    }

    pub fn rng(&self, replication: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(replication);
        rng
    }

    /// Draws the stream of replication `replication`.
    pub fn generate(&self, replication: u64) -> Vec<f64> {
        let mut rng = self.rng(replication);
        let uniform_around = |rng: &mut ChaCha8Rng, m: f64| {
            let u: f64 = rng.gen_range(-1.0..=1.0);
            (m + (0.5 - m.abs()) * u).clamp(-0.5, 0.5)
        };
        match &self.kind {
            StreamKind::NullSymmetric(NullFamily::Uniform) => {
                (0..self.length).map(|_| rng.gen_range(-0.5..=0.5)).collect()
            }
            StreamKind::NullSymmetric(NullFamily::TransformedNormal { scale_ratio }) => (0..self.length)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    centered_normal_cdf(scale_ratio * z)
                })
                .collect(),
            StreamKind::ConstantShift { shift } => (0..self.length).map(|_| uniform_around(&mut rng, *shift)).collect(),
            StreamKind::RegimeSwitch { .. } => self.means().into_iter().map(|m| uniform_around(&mut rng, m)).collect(),
        }
    }
}

/// How the e-process pair is run over a synthetic stream.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Monitor {
    /// One process from step 1, monitored at every step.
    Cumulative,
    /// The deployed procedure: a fresh window `t-ω+1..=t` at every `t ≥ ω`.
    Sliding { window: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TestParams {
    pub lambda: f64,
    pub alpha: f64,
    pub monitor: Monitor,
}

/// What happened in one replication.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReplicationOutcome {
    /// First step where `E` reached `2/α`.
    pub first_crossing_pq: Option<usize>,
    /// First step where `E*` reached `2/α`.
    pub first_crossing_qp: Option<usize>,
    /// The true average differential stayed inside every band. `None` when
    /// bands are undefined (`λ = 0`).
    pub covered: Option<bool>,
    /// Some band lay entirely on one side of zero.
    pub band_excluded_zero: bool,
}

/// Runs the e-process pair over replication `replication` of `spec`.
pub fn run_replication(
    spec: &SyntheticStreamSpec,
    params: &TestParams,
    replication: u64,
) -> Result<ReplicationOutcome> {
    let mut out = run_replication_multi(spec, &[params.lambda], params.alpha, params.monitor, replication)?;
    Ok(out.remove(0))
}

/// Runs one replication for several risk weights at once.
///
/// The window statistics `(n, Σδ, V)` do not depend on `λ`, so they are
/// computed once per step and shared; the result is identical to calling
/// [`run_replication`] once per weight.
pub fn run_replication_multi(
    spec: &SyntheticStreamSpec,
    lambdas: &[f64],
    alpha: f64,
    monitor: Monitor,
    replication: u64,
) -> Result<Vec<ReplicationOutcome>> {
    let configs = lambdas
        .iter()
        .map(|&l| EProcessConfig::new(l, alpha))
        .collect::<Result<Vec<_>>>()?;
    let deltas = spec.generate(replication);
    for &d in &deltas {
        if d.abs() > 0.5 {
            return Err(Error::OutOfRange { value: d });
        }
    }
    let means = spec.means();
    let mut prefix = Vec::with_capacity(means.len() + 1);
    prefix.push(0.0);
    for m in &means {
        prefix.push(prefix[prefix.len() - 1] + m);
    }
    let mut outs: Vec<ReplicationOutcome> = configs
        .iter()
        .map(|c| ReplicationOutcome {
            covered: (c.lambda() > 0.0).then_some(true),
            ..Default::default()
        })
        .collect();

    let mut visit = |t: usize, m: &WindowMoments| -> Result<()> {
        let n = m.count;
        let mean = m.mean();
        let truth = (prefix[t] - prefix[t - n]) / n as f64;
        for (config, out) in configs.iter().zip(outs.iter_mut()) {
            let (log_e, log_e_star) = m.log_values(config);
            if out.first_crossing_pq.is_none() && log_e >= config.log_threshold() {
                out.first_crossing_pq = Some(t);
            }
            if out.first_crossing_qp.is_none() && log_e_star >= config.log_threshold() {
                out.first_crossing_qp = Some(t);
            }
            if out.covered.is_some() {
                let half = uniform_boundary(config, m.v_hat)? / n as f64;
                if (truth - mean).abs() > half {
                    out.covered = Some(false);
                }
                if mean - half > 0.0 || mean + half < 0.0 {
                    out.band_excluded_zero = true;
                }
            }
        }
        Ok(())
    };

    match monitor {
        Monitor::Cumulative => {
            let mut m = WindowMoments::default();
            for (i, &d) in deltas.iter().enumerate() {
                m.push(d);
                visit(i + 1, &m)?;
            }
        }
        Monitor::Sliding { window } => {
            if window == 0 {
                return Err(Error::InvalidParameter {
                    name: "window",
                    value: 0.0,
                });
            }
            for t in window..=deltas.len() {
                let m = WindowMoments::of(&deltas[t - window..t]);
                visit(t, &m)?;
            }
        }
    }
    Ok(outs)
}

/// Binomial rate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RateEstimate {
    pub hits: usize,
    pub replications: usize,
    pub rate: f64,
    /// Empirical standard error `sqrt(r(1-r)/n)`.
    pub se: f64,
    pub low_power: bool,
}

impl RateEstimate {
    pub fn from_counts(hits: usize, replications: usize) -> Self {
        let n = replications.max(1) as f64;
        let rate = hits as f64 / n;
        Self {
            hits,
            replications,
            rate,
            se: libm::sqrt(rate * (1.0 - rate) / n),
            low_power: replications < MIN_REPLICATIONS,
        }
    }

    /// Standard error of a binomial proportion at `level` over this many
    /// replications.
    pub fn se_at(&self, level: f64) -> f64 {
        libm::sqrt(level * (1.0 - level) / self.replications.max(1) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FwerEstimate {
    pub either: RateEstimate,
    pub pq: RateEstimate,
    pub qp: RateEstimate,
}

impl FwerEstimate {
    /// Each side within `α/2 + 3 SE`, with SE taken at the nominal `α/2`.
    pub fn within_bound(&self, alpha: f64) -> bool {
        let level = alpha / 2.0;
        [self.pq, self.qp]
            .iter()
            .all(|r| r.rate <= level + 3.0 * r.se_at(level))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PowerEstimate {
    /// Median first-crossing step; `None` means infinite.
    pub median_delay: Option<usize>,
    pub finite_fraction: f64,
    pub replications: usize,
    pub low_power: bool,
}

pub fn fwer_from_outcomes(outcomes: &[ReplicationOutcome]) -> FwerEstimate {
    let n = outcomes.len();
    let pq = outcomes.iter().filter(|o| o.first_crossing_pq.is_some()).count();
    let qp = outcomes.iter().filter(|o| o.first_crossing_qp.is_some()).count();
    let either = outcomes
        .iter()
        .filter(|o| o.first_crossing_pq.is_some() || o.first_crossing_qp.is_some())
        .count();
    FwerEstimate {
        either: RateEstimate::from_counts(either, n),
        pq: RateEstimate::from_counts(pq, n),
        qp: RateEstimate::from_counts(qp, n),
    }
}

pub fn coverage_from_outcomes(outcomes: &[ReplicationOutcome]) -> Result<RateEstimate> {
    let mut hits = 0;
    for o in outcomes {
        match o.covered {
            Some(true) => hits += 1,
            Some(false) => {}
            None => {
                return Err(Error::InvalidParameter {
                    name: "lambda",
                    value: 0.0,
                })
            }
        }
    }
    Ok(RateEstimate::from_counts(hits, outcomes.len()))
}

/// Median delay of the side that should reject: `E` for a positive shift,
/// `E*` for a negative one.
pub fn power_from_outcomes(outcomes: &[ReplicationOutcome], shift: f64) -> PowerEstimate {
    let mut delays: Vec<usize> = outcomes
        .iter()
        .map(|o| {
            let hit = if shift >= 0.0 {
                o.first_crossing_pq
            } else {
                o.first_crossing_qp
            };
            hit.unwrap_or(usize::MAX)
        })
        .collect();
    delays.sort_unstable();
    let n = delays.len();
    let finite = delays.iter().filter(|d| **d != usize::MAX).count();
    let median = if n == 0 { usize::MAX } else { delays[(n - 1) / 2] };
    PowerEstimate {
        median_delay: (median != usize::MAX).then_some(median),
        finite_fraction: finite as f64 / n.max(1) as f64,
        replications: n,
        low_power: n < MIN_REPLICATIONS,
    }
}

/// Runs every replication in order.
pub fn run_replications(spec: &SyntheticStreamSpec, params: &TestParams) -> Result<Vec<ReplicationOutcome>> {
    spec.validate()?;
    (0..spec.replications as u64)
        .map(|r| run_replication(spec, params, r))
        .collect()
}

/// Rate at which either process ever crosses `2/α` on a null stream.
pub fn simulate_fwer(spec: &SyntheticStreamSpec, params: &TestParams) -> Result<FwerEstimate> {
    if !spec.is_null() {
        return Err(Error::InvalidParameter {
            name: "kind",
            value: f64::NAN,
        });
    }
    Ok(fwer_from_outcomes(&run_replications(spec, params)?))
}

/// Rate at which the true average differential stays inside every band.
pub fn simulate_coverage(spec: &SyntheticStreamSpec, params: &TestParams) -> Result<RateEstimate> {
    if params.lambda == 0.0 {
        return Err(Error::InvalidParameter {
            name: "lambda",
            value: 0.0,
        });
    }
    coverage_from_outcomes(&run_replications(spec, params)?)
}

/// Median detection delay under a constant shift.
pub fn simulate_power(spec: &SyntheticStreamSpec, params: &TestParams) -> Result<PowerEstimate> {
    let shift = match spec.kind {
        StreamKind::ConstantShift { shift } if shift != 0.0 => shift,
        _ => {
            return Err(Error::InvalidParameter {
                name: "shift",
                value: 0.0,
            })
        }
    };
    Ok(power_from_outcomes(&run_replications(spec, params)?, shift))
}
