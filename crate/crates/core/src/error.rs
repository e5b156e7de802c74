use std::path::PathBuf;

/// Errors produced anywhere in the synchronization chain or the harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid preamble: {0}")]
    InvalidPreamble(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index {index} out of range (need {needed} samples, have {available})")]
    OutOfRange {
        index: usize,
        needed: usize,
        available: usize,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("innovation covariance is singular; check the EKF noise configuration")]
    SingularInnovation,

    #[error("no preamble detected in any of {frames} frames (peak statistic {best_peak:.3e}, last threshold reference {reference:.3e})")]
    NoDetections {
        frames: usize,
        best_peak: f64,
        reference: f64,
    },

    #[error("cannot build statistics from an empty sample set")]
    EmptyStats,

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed report: {0}")]
    Report(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
