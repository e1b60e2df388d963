//! Anytime-valid comparison and fusion of two competing forecasts.
//!
//! Two horizon forecasts `p_t`, `q_t` are scored against realized outcomes
//! by MAE. The score differences are squeezed into `[-1/2, 1/2]` with a
//! calibrated normal-CDF sigmoid and fed to a pair of e-processes, one per
//! direction of superiority. Rejections (at `2/α` each) drive a per-step
//! choice between the forecasts a fixed lag later; when neither side has
//! enough evidence, a persistence, sampling or weighted-average fallback
//! fills in.
//!
//! The crate is `no_std` (with `alloc`); I/O, configuration and the CLI live
//! in the `eselect` crate.
//!
//! ```
//! use eselect_core::savi::{EProcessConfig, EProcessState};
//!
//! let config = EProcessConfig::new(0.5, 0.05).unwrap();
//! let mut state = EProcessState::new(config, 1);
//! for _ in 0..40 {
//!     state = state.update(0.3).unwrap();
//! }
//! // P keeps scoring worse, so "Q is not better" is rejected.
//! assert!(state.test().reject_h0_pq);
//! ```

#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod engine;
pub mod error;
pub mod fusion;
pub mod savi;
pub mod score;
pub mod transform;
pub mod validation;

/// Version of this crate, recorded in run metadata.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub use engine::{
    compute_evidence, oracle_benchmark, run_selection, select, Benchmark, EvidenceConfig, EvidenceStep, EvidenceTrace,
    FusionConfig, SelectionConfig, SelectionRun, SelectionSummary, StepRecord,
};
pub use error::{Error, Result};
pub use fusion::{decide, fuse, weights, Arm, FusedForecast, SelectionDecision, Source, Strategy};
pub use savi::{
    confidence_band, psi_e, psi_n, test, ConfidenceBand, EProcessConfig, EProcessState, SlidingEProcess, TestVerdict,
    WarmupPolicy, WindowMoments,
};
pub use score::{mae, rolling_average, score_difference, ForecastTriple, RollingMean, ScoreStream};
pub use transform::{calibrate_scale, TransformSpec};
