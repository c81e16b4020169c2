use thiserror::Error;

/// Errors surfaced by the numerical core.
#[derive(Debug, Error)]
pub enum RbmError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("singular point: {0}")]
    SingularPoint(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no convergence in {what} after {iterations} iterations (residual {residual:.3e})")]
    NonConvergence {
        what: String,
        iterations: usize,
        residual: f64,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, RbmError>;
