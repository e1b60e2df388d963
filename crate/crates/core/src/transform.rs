//! Sigmoid bounding of raw score differences.
//!
//! Raw MAE differences are unbounded; the e-process needs values in
//! `[-1/2, 1/2]`. The map used here is
//!
//! ```text
//! f(x) = Φ(x / σ) - 1/2
//! ```
//!
//! which is odd, close to linear around zero and saturates at `±1/2`.
//! `σ` is the sample standard deviation of an initial calibration stretch.

use crate::error::{check_finite, Error, Result};

/// One week of 15-minute steps.
pub const DEFAULT_CALIBRATION_LENGTH: usize = 672;

const SQRT_2: f64 = core::f64::consts::SQRT_2;
const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// `Φ(z) - 1/2`, computed through `erf` so it stays accurate near zero.
pub fn centered_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erf(z / SQRT_2)
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

pub fn normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * libm::exp(-0.5 * z * z)
}

/// Inverse of [`centered_normal_cdf`] on `(-1/2, 1/2)`.
///
/// Safeguarded Newton iteration inside a shrinking bracket. Converges to a
/// few ulps of the root; the bracket alone guarantees `1e-10`.
pub fn centered_normal_quantile(d: f64) -> Result<f64> {
    if !(d.abs() < 0.5) {
        return Err(Error::OutOfRange { value: d });
    }
    if d == 0.0 {
        return Ok(0.0);
    }
    // Odd symmetry: solve on the positive half only.
    let target = d.abs();
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while centered_normal_cdf(hi) < target {
        lo = hi;
        hi *= 2.0;
        if hi >= 64.0 {
            break;
        }
    }
    let mut z = (target / FRAC_1_SQRT_2PI).clamp(lo, hi);
    for _ in 0..200 {
        let f = centered_normal_cdf(z) - target;
        if f == 0.0 {
            break;
        }
        if f < 0.0 {
            lo = z;
        } else {
            hi = z;
        }
        let slope = normal_pdf(z);
        let mut next = z - f / slope;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let step = (next - z).abs();
        z = next;
        if step <= 2.0 * f64::EPSILON * z.abs() || hi - lo <= 2.0 * f64::EPSILON * hi {
            break;
        }
    }
    Ok(z.copysign(d))
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter {
            name: "probability",
            value: p,
        });
    }
    centered_normal_quantile(p - 0.5)
}

/// Scale of the bounding sigmoid.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TransformSpec {
    sigma: f64,
    calibration_length: usize,
}

impl TransformSpec {
    pub fn new(sigma: f64, calibration_length: usize) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::InvalidParameter {
                name: "sigma",
                value: sigma,
            });
        }
        if calibration_length < 2 {
            return Err(Error::InvalidParameter {
                name: "calibration_length",
                value: calibration_length as f64,
            });
        }
        Ok(Self {
            sigma,
            calibration_length,
        })
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn calibration_length(&self) -> usize {
        self.calibration_length
    }

    /// `Φ(x/σ) - 1/2`; strictly inside `(-1/2, 1/2)` for moderate `x`, and
    /// saturating to `±1/2` in floating point far in the tails.
    pub fn bound(&self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(Error::NonFinite { index: 0 });
        }
        Ok(centered_normal_cdf(x / self.sigma))
    }

    /// Back-transform to the raw (Watts) scale.
    pub fn unbound(&self, d: f64) -> Result<f64> {
        Ok(self.sigma * centered_normal_quantile(d)?)
    }
}

/// Fits `σ` as the sample standard deviation (divisor `n - 1`) of the first
/// `calibration_length` raw differences.
pub fn calibrate_scale(delta_hat: &[f64], calibration_length: usize) -> Result<TransformSpec> {
    if calibration_length < 2 {
        return Err(Error::InvalidParameter {
            name: "calibration_length",
            value: calibration_length as f64,
        });
    }
    if delta_hat.len() < calibration_length {
        return Err(Error::InsufficientHistory {
            needed: calibration_length,
            available: delta_hat.len(),
        });
    }
    let head = &delta_hat[..calibration_length];
    check_finite(head)?;
    let n = head.len() as f64;
    let mean = head.iter().sum::<f64>() / n;
    let ss: f64 = head.iter().map(|x| (x - mean) * (x - mean)).sum();
    let sigma = libm::sqrt(ss / (n - 1.0));
    if !(sigma > 0.0) {
        return Err(Error::DegenerateScale);
    }
    TransformSpec::new(sigma, calibration_length)
}
