//! Harness around [`eselect_core`]: reading forecast tables, configuring
//! runs, grid sweeps, Monte Carlo validation, benchmarks and report files.
//!
//! The `eselect` binary exposes the same functionality as the subcommands
//! `run`, `sweep`, `validate` and `bench`; see [`commands`].

#![forbid(unsafe_code)]

pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod report;
pub mod sweep;
pub mod validate;

pub use config::{ConfigLayer, GridDefaults, RunConfig};
pub use error::{HarnessError, Result};
pub use ingest::{parse_dataset, read_dataset, Dataset};
