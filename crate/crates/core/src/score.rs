//! Per-step MAE scores, raw score differences and rolling averages.
//!
//! The score is negatively oriented: a negative difference
//! `MAE(p, y) - MAE(q, y)` favors forecast P.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use crate::error::{check_finite, Error, Result};

/// One step of input: two horizon forecasts and the realized outcomes.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ForecastTriple {
    pub t: u64,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    pub y: Vec<f64>,
}

impl ForecastTriple {
    pub fn new(t: u64, p: Vec<f64>, q: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        let triple = Self { t, p, q, y };
        triple.validate()?;
        Ok(triple)
    }

    /// Checks equal, non-zero horizon lengths and finite entries.
    pub fn validate(&self) -> Result<()> {
        let h = self.y.len();
        if h == 0 {
            return Err(Error::EmptyHorizon);
        }
        for v in [&self.p, &self.q] {
            if v.len() != h {
                return Err(Error::ShapeMismatch {
                    expected: h,
                    found: v.len(),
                });
            }
        }
        check_finite(&self.p)?;
        check_finite(&self.q)?;
        check_finite(&self.y)
    }

    pub fn horizon(&self) -> usize {
        self.y.len()
    }

    pub fn mae_p(&self) -> Result<f64> {
        mae(&self.p, &self.y)
    }

    pub fn mae_q(&self) -> Result<f64> {
        mae(&self.q, &self.y)
    }
}

/// Mean absolute error of a horizon forecast against its outcomes.
pub fn mae(forecast: &[f64], outcome: &[f64]) -> Result<f64> {
    if forecast.len() != outcome.len() {
        return Err(Error::ShapeMismatch {
            expected: outcome.len(),
            found: forecast.len(),
        });
    }
    if outcome.is_empty() {
        return Err(Error::EmptyHorizon);
    }
    check_finite(forecast)?;
    check_finite(outcome)?;
    let total: f64 = forecast.iter().zip(outcome).map(|(f, y)| (f - y).abs()).sum();
    Ok(total / outcome.len() as f64)
}

/// Raw score difference `MAE(p, y) - MAE(q, y)`.
pub fn score_difference(triple: &ForecastTriple) -> Result<f64> {
    Ok(triple.mae_p()? - triple.mae_q()?)
}

/// Mean of the `window` entries ending at step `t` (1-based), i.e. entries
/// `t - window + 1 ..= t`.
pub fn rolling_average(values: &[f64], t: usize, window: usize) -> Result<f64> {
    if window == 0 {
        return Err(Error::InvalidParameter {
            name: "window",
            value: 0.0,
        });
    }
    if t < window {
        return Err(Error::InsufficientHistory {
            needed: window,
            available: t,
        });
    }
    if t > values.len() {
        return Err(Error::InsufficientHistory {
            needed: t,
            available: values.len(),
        });
    }
    let slice = &values[t - window..t];
    Ok(slice.iter().sum::<f64>() / window as f64)
}

/// Streaming mean over the most recent `window` values.
///
/// Keeps a compensated running sum and rebuilds it from the buffer once per
/// full window so rounding error cannot accumulate across windows.
#[derive(Debug, Clone)]
pub struct RollingMean {
    window: usize,
    buf: VecDeque<f64>,
    sum: f64,
    compensation: f64,
    since_resync: usize,
}

impl RollingMean {
    pub fn new(window: usize) -> Result<Self> {
        if window == 0 {
            return Err(Error::InvalidParameter {
                name: "window",
                value: 0.0,
            });
        }
        Ok(Self {
            window,
            buf: VecDeque::with_capacity(window),
            sum: 0.0,
            compensation: 0.0,
            since_resync: 0,
        })
    }

    pub fn window(&self) -> usize {
        self.window
    }

    fn add(&mut self, x: f64) {
        // Neumaier summation
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Pushes a value; returns the window mean once `window` values are held.
    pub fn push(&mut self, x: f64) -> Option<f64> {
        if self.buf.len() == self.window {
            if let Some(old) = self.buf.pop_front() {
                self.add(-old);
            }
        }
        self.buf.push_back(x);
        self.add(x);
        self.since_resync += 1;
        if self.since_resync >= self.window {
            self.sum = self.buf.iter().sum();
            self.compensation = 0.0;
            self.since_resync = 0;
        }
        self.mean()
    }

    pub fn mean(&self) -> Option<f64> {
        (self.buf.len() == self.window).then(|| (self.sum + self.compensation) / self.window as f64)
    }
}

/// Evidence stream: raw and transformed differences plus rolling means.
#[derive(Debug, Clone)]
pub struct ScoreStream {
    delta_hat: Vec<f64>,
    delta_tilde: Vec<f64>,
    rolling_mean: Vec<Option<f64>>,
    roller: RollingMean,
}

impl ScoreStream {
    pub fn new(window: usize) -> Result<Self> {
        Ok(Self {
            delta_hat: Vec::new(),
            delta_tilde: Vec::new(),
            rolling_mean: Vec::new(),
            roller: RollingMean::new(window)?,
        })
    }

    /// Appends one step. `delta_tilde` must lie in `[-1/2, 1/2]`.
    pub fn push(&mut self, delta_hat: f64, delta_tilde: f64) -> Result<Option<f64>> {
        if !delta_hat.is_finite() {
            return Err(Error::NonFinite {
                index: self.delta_hat.len(),
            });
        }
        if !(delta_tilde.abs() <= 0.5) {
            return Err(Error::OutOfRange { value: delta_tilde });
        }
        self.delta_hat.push(delta_hat);
        self.delta_tilde.push(delta_tilde);
        let mean = self.roller.push(delta_tilde);
        self.rolling_mean.push(mean);
        Ok(mean)
    }

    pub fn window(&self) -> usize {
        self.roller.window()
    }

    pub fn len(&self) -> usize {
        self.delta_hat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delta_hat.is_empty()
    }

    pub fn delta_hat(&self) -> &[f64] {
        &self.delta_hat
    }

    pub fn delta_tilde(&self) -> &[f64] {
        &self.delta_tilde
    }

    /// Rolling means per step; `None` before the window fills.
    pub fn rolling_mean(&self) -> &[Option<f64>] {
        &self.rolling_mean
    }
}
