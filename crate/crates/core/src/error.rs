use thiserror::Error;

/// Errors raised by the estimators, the centering routines and the parsers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not positive definite (smallest eigenvalue {min_eigenvalue:e})")]
    NotPositiveDefinite { min_eigenvalue: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("empty dataset")]
    EmptyDataset,

    /// A weight with infinite u(0) met an observation sitting on the center.
    #[error("zero-norm observation at row {row}")]
    ZeroNormObservation { row: usize },

    #[error("data do not span R^{q} (numerical rank {rank})")]
    NonSpanning { rank: usize, q: usize },

    #[error("fixed-point iteration did not converge after {iterations} iterations (gap {gap:e})")]
    NonConvergence {
        iterations: usize,
        gap: f64,
        last: Vec<f64>,
    },

    /// Eigenvalues of the iterate blew up or collapsed; the M-estimate most
    /// likely does not exist for this sample.
    #[error(
        "estimate likely does not exist: eigenvalues diverging after {iterations} iterations \
         (largest {largest:e}, condition {condition:e})"
    )]
    LikelyNonexistent {
        iterations: usize,
        largest: f64,
        condition: f64,
    },

    #[error("spatial median did not converge after {iterations} iterations (residual {residual:e})")]
    MedianNonConvergence {
        iterations: usize,
        residual: f64,
        last: Vec<f64>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("all tuning candidates failed")]
    AllCandidatesFailed,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerics (as opposed to bad input).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonConvergence { .. }
                | Error::LikelyNonexistent { .. }
                | Error::MedianNonConvergence { .. }
                | Error::NotPositiveDefinite { .. }
                | Error::NonSpanning { .. }
                | Error::ZeroNormObservation { .. }
                | Error::AllCandidatesFailed
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
