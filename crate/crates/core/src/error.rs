use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("length mismatch: expected {expected} taps, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    /// Bad invocation or an incomplete config.
    #[error("{0}")]
    Usage(String),

    #[error("unknown figure {0} (presets exist for 1..=9)")]
    UnknownFigure(u32),

    /// A closed-form expression whose precondition does not hold, e.g. a
    /// non-positive denominator in a step-size bound.
    #[error("{0} is undefined for this configuration")]
    Undefined(&'static str),

    #[error("theoretical MSD model diverged at iteration {iteration}")]
    ModelDiverged { iteration: usize },

    #[error("every trial diverged for `{0}`")]
    AllTrialsDiverged(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn config(line: usize, message: impl Into<String>) -> Self {
        Error::Config {
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input rather than by a run.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::LengthMismatch { .. }
                | Error::InvalidParameter { .. }
                | Error::Config { .. }
                | Error::Usage(_)
                | Error::UnknownFigure(_)
        )
    }
}
