//! Harness errors and their process exit codes.

use std::path::PathBuf;

/// Success.
pub const EXIT_OK: i32 = 0;
/// Bad flags, bad configuration file or a configuration the data cannot support.
pub const EXIT_USAGE: i32 = 1;
/// Unreadable or malformed input data, or output that could not be written.
pub const EXIT_DATA: i32 = 2;
/// A validation plan ran to completion and at least one check failed.
pub const EXIT_VALIDATION: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),

    #[error("{path}: line {line}: {message}")]
    Ingest { path: String, line: u64, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("data: {0}")]
    Data(eselect_core::Error),

    #[error("validation failed: {failed} of {total} checks outside tolerance")]
    ValidationFailed { failed: usize, total: usize },
}

impl HarnessError {
    pub fn config(message: impl Into<String>) -> Self {
        Self::Config(message.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => EXIT_USAGE,
            Self::Ingest { .. } | Self::Io { .. } | Self::Format { .. } | Self::Data(_) => EXIT_DATA,
            Self::ValidationFailed { .. } => EXIT_VALIDATION,
        }
    }
}

impl From<eselect_core::Error> for HarnessError {
    /// Parameter and length problems are configuration errors; anything the
    /// numbers themselves trigger is a data error.
    fn from(e: eselect_core::Error) -> Self {
        use eselect_core::Error as E;
        match e {
            E::InvalidParameter { .. } | E::InsufficientLength { .. } => Self::Config(e.to_string()),
            other => Self::Data(other),
        }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
