use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum MdlError {
    /// An input failed validation (off-simplex vector, out-of-range parameter, malformed table).
    #[error("validation error: {0}")]
    Validation(String),

    /// A reference to something the instance does not contain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A call-order precondition was not met (e.g. reading an unpopulated bank).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An internal invariant broke; indicates a bug rather than bad input.
    #[error("invariant violated: {0}")]
    Invariant(String),

    /// An iterative solver stopped at its cap before reaching the requested gap.
    #[error("did not converge after {iterations} iterations: duality gap {gap:e} > tolerance {tol:e}")]
    Convergence { iterations: u64, gap: f64, tol: f64 },

    /// A configuration cannot be executed as given.
    #[error("configuration error: {0}")]
    Configuration(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, MdlError>;

pub(crate) fn validation<T>(msg: impl Into<String>) -> Result<T> {
    Err(MdlError::Validation(msg.into()))
}
