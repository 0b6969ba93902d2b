use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate triangle with signed area {0:e}")]
    DegenerateTriangle(f64),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("factorization failed for a {dim}x{dim} matrix with {nnz} nonzeros: {reason}")]
    Factorization {
        dim: usize,
        nnz: usize,
        reason: String,
    },

    #[error("linear solve residual {residual:e} exceeds tolerance {tolerance:e}")]
    InaccurateSolve { residual: f64, tolerance: f64 },

    #[error("{what} did not converge after {iterations} iterations (bracket [{lower:e}, {upper:e}])")]
    NoConvergence {
        what: &'static str,
        iterations: usize,
        lower: f64,
        upper: f64,
    },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("dense fallback refused: dimension {0} exceeds the limit of {1}")]
    TooLarge(usize, usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures caused by the caller's input rather than numerics.
    pub fn is_config_error(&self) -> bool {
        match self {
            Error::InvalidConfig(_) => true,
            Error::Json(e) => !e.is_io(),
            _ => false,
        }
    }
}
