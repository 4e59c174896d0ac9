use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the range where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// A probability vector violates the distribution invariants.
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("calibration input error: {0}")]
    CalibrationInput(String),

    #[error("fit error: {0}")]
    Fit(String),

    /// The fit succeeded numerically but produced a non-physical gain.
    #[error("calibration failure: fitted gain {gamma_hat} is not positive")]
    CalibrationFailure { gamma_hat: f64 },

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("input error: {0}")]
    Input(String),

    /// Configuration problems; every offending key is listed.
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("acceptance threshold violated: {}", .0.join("; "))]
    Acceptance(Vec<String>),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit status used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 1,
            Error::Domain(_)
            | Error::InvalidDistribution(_)
            | Error::CalibrationInput(_)
            | Error::Input(_)
            | Error::Config(_)
            | Error::Parse { .. }
            | Error::Json(_) => 2,
            Error::Fit(_) | Error::CalibrationFailure { .. } | Error::Quadrature(_) => 3,
            Error::Acceptance(_) => 4,
        }
    }
}
