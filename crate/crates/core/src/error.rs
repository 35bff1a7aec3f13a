use alloc::string::String;

/// Errors raised by the covariance-matrix toolkit.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("expected a square matrix of even dimension, got {rows}x{cols}")]
    NotPhaseSpace { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPositiveSemidefinite(f64),

    #[error("matrix is not positive definite (min eigenvalue {0:e})")]
    NotPositiveDefinite(f64),

    #[error("covariance matrix violates the uncertainty relation (min eigenvalue {0:e})")]
    Unphysical(f64),

    #[error("symplectic spectrum does not come in pairs (|{0} - {1}|)")]
    UnpairedSpectrum(f64, f64),

    #[error("steering measure routes disagree: {spectral} vs {determinant}")]
    MeasureMismatch { spectral: f64, determinant: f64 },

    #[error("invalid {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("semidefinite solver failed: {0}")]
    SolverFailure(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
