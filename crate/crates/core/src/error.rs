use thiserror::Error;

/// Errors raised by the selection engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("horizon length mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: usize, found: usize },

    #[error("empty horizon vector")]
    EmptyHorizon,

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("insufficient history: need {needed} observations, have {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("degenerate scale: calibration values have zero spread")]
    DegenerateScale,

    #[error("invalid parameter {name} = {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("value {value} outside the open interval (-1/2, 1/2)")]
    OutOfRange { value: f64 },

    #[error("window anchor {requested} does not advance past {previous}")]
    Sequencing { previous: u64, requested: u64 },

    #[error("series too short: need more than {needed} steps, have {available}")]
    InsufficientLength { needed: usize, available: usize },
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}
