use thiserror::Error;

use crate::isdual::SolveReport;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("grid axis {axis} has N = {size}, which must exceed 2 * {radius}")]
    GridTooCoarse { axis: usize, size: usize, radius: usize },

    #[error("lag {0:?} lies outside the lag box")]
    LagOutsideBox(Vec<i64>),

    #[error("matrix is not Hermitian (relative drift {drift:.3e})")]
    NotHermitian { drift: f64 },

    #[error("matrix is not positive definite (pivot {pivot})")]
    NotPositiveDefinite { pivot: usize },

    #[error("field is not positive definite at grid point {point:?}")]
    NotPositiveDefiniteAt { point: Vec<usize> },

    #[error("field shapes differ: {0}")]
    ShapeMismatch(String),

    #[error("dual certificate is infeasible at grid point {point:?}")]
    Infeasible { point: Vec<usize> },

    #[error("solver did not converge in {} iterations", .0.iterations)]
    MaxIterationsExceeded(Box<SolveReport>),

    #[error("line search stalled; the covariances are likely not feasible")]
    InfeasibleMoments(Box<SolveReport>),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { field, reason: reason.into() }
}
