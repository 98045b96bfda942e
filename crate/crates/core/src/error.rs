use thiserror::Error;

/// Errors raised anywhere in the test pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("input contains a non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("need at least {required} observations, got {got}")]
    TooFewObservations { required: usize, got: usize },

    #[error("dimension must be at least 2, got {0}")]
    DimensionTooSmall(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),

    /// Cholesky pivot `pivot` (1-based) was not positive. For the pooled scatter
    /// this means p >= n1 + n2 (or rank was lost to centering).
    #[error("matrix is not positive definite: pivot {pivot} = {value:.3e}")]
    NotPositiveDefinite { pivot: usize, value: f64 },

    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("dimension p = {p} must be below n1 + n2 = {sum}")]
    DimensionTooLarge { p: usize, sum: usize },

    #[error("excess kurtosis {0} is below the moment bound -2")]
    KurtosisOutOfRange(f64),

    #[error("null variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("no eigenvalue lies strictly inside (0, 1)")]
    EmptyInterior,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("contour passes within {distance:.3e} of a pole at {pole:.6}")]
    PoleProximity { pole: f64, distance: f64 },

    #[error("quadrature did not converge with {nodes} nodes")]
    QuadratureNonConvergence { nodes: usize },

    #[error("{failed} of {reps} replicates failed numerically: {last}")]
    TooManyFailures {
        failed: usize,
        reps: usize,
        last: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
