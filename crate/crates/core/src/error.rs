use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse classification used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Domain,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("model is not stationary: q = {q} (need |q| < 1)")]
    NonStationary { q: f64 },

    #[error("invalid horizon: {0}")]
    InvalidHorizon(String),

    #[error("degenerate variance for factor {factor} at horizon {horizon}")]
    DegenerateVariance { factor: &'static str, horizon: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid migration matrix: {0}")]
    InvalidMatrix(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("calibration failed:\n{}", .0.iter().map(|i| format!("  - {}: {}", i.parameter, i.reason)).collect::<Vec<_>>().join("\n"))]
    Calibration(Vec<CalibrationIssue>),

    #[error("resource exhausted: {0}")]
    ResourceExhausted(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

/// One failed piece of a composite calibration, attributed to a parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationIssue {
    pub parameter: String,
    pub reason: String,
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NonStationary { .. }
            | Error::DegenerateVariance { .. }
            | Error::Degenerate(_)
            | Error::InvalidHorizon(_)
            | Error::InvalidParameter { .. } => ErrorKind::Domain,
            Error::Calibration(issues) => {
                if issues.iter().all(|i| i.parameter == "q") {
                    ErrorKind::Domain
                } else {
                    ErrorKind::Data
                }
            }
            Error::Config(_) => ErrorKind::Config,
            _ => ErrorKind::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }
}
