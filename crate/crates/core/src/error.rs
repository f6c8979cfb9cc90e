use thiserror::Error;

/// Errors raised by the covariance, leave-one-out and estimation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GpError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {found} ({context})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("parameter index {index} out of range (q = {q})")]
    ParameterIndex { index: usize, q: usize },

    /// Cholesky factorization of `K + noise * I` broke down at `pivot`.
    #[error("covariance matrix is not positive definite (pivot {pivot})")]
    SingularCovariance { pivot: usize },

    #[error("scoring rule undefined at index {index}: {reason}")]
    DegenerateScore { index: usize, reason: String },

    #[error("predictive variance must be positive, got {0}")]
    Domain(f64),

    #[error("estimation failed: {0}")]
    EstimationFailed(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),
}

pub type Result<T, E = GpError> = std::result::Result<T, E>;
