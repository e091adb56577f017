//! Error type shared by every module in the crate.

use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, HypoError>;

#[derive(Debug, Error)]
pub enum HypoError {
    /// A line of an on-disk record file did not parse or failed validation.
    #[error("{path}:{line}: {message}")]
    Schema {
        path: PathBuf,
        /// 1-based line number of the offending record.
        line: usize,
        message: String,
    },

    /// Two records in one corpus file share an id.
    #[error("duplicate record id `{id}` at {path}:{line}")]
    DuplicateId {
        id: String,
        path: PathBuf,
        line: usize,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A caller violated an operation contract (e.g. a token containing
    /// whitespace handed to `detokenize`).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    /// A provider call failed after exhausting its retry budget.
    #[error("provider `{provider}` failed after {attempts} attempt(s): {message}")]
    Provider {
        provider: String,
        attempts: u32,
        message: String,
    },

    /// A metric could not be computed from the given inputs.
    #[error("{0}")]
    Metric(String),
}

impl HypoError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HypoError::Io {
            path: path.into(),
            source,
        }
    }

    pub fn schema(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        HypoError::Schema {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
