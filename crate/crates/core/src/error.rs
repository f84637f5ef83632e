use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("size cap exceeded: {0}")]
    SizeCap(String),

    #[error("numerical failure in {what} (residual {residual:.3e})")]
    NumericalFailure { what: String, residual: f64 },

    #[error("unstable trap: {0}")]
    Instability(String),

    #[error("deflation failed at state {index}: energy {energy} below previous {previous}")]
    DeflationFailure {
        index: usize,
        energy: f64,
        previous: f64,
    },

    #[error("noise calibration failed (residual {residual:.3e})")]
    CalibrationFailure { residual: f64 },

    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of a numerical routine, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NumericalFailure { .. }
                | Error::Instability(_)
                | Error::DeflationFailure { .. }
                | Error::CalibrationFailure { .. }
        )
    }

    pub(crate) fn numerical(what: impl Into<String>, residual: f64) -> Self {
        Error::NumericalFailure {
            what: what.into(),
            residual,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
