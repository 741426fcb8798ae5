use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {location}")]
    Numeric { location: String },

    #[error("training diverged at epoch {epoch}: loss is {loss}")]
    Divergence { epoch: usize, loss: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("unsupported schema for {method}: {reason}")]
    UnsupportedSchema { method: String, reason: String },

    #[error("too few rows: {0}")]
    TooFewRows(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: u64,
        msg: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("external classifier failed: {0}")]
    External(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn numeric(location: impl Into<String>) -> Self {
        Error::Numeric {
            location: location.into(),
        }
    }

    /// Process exit code used by the command line front end.
    ///
    /// 1 is reserved for usage errors, which are detected before any of
    /// these are produced.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numeric { .. } | Error::Divergence { .. } => 3,
            Error::InvalidArgument(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
