use thiserror::Error;

/// Errors raised by the geometry, synthesis and estimation routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("direction undefined: positions coincide")]
    UndefinedDirection,
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("beamforming vector is not unit norm (|w| = {0})")]
    NotUnitNorm(f64),
    #[error("steering matrix is rank deficient")]
    RankDeficient,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("smoothing plan does not fit the array: {0}")]
    PlanMismatch(String),
    #[error("eigendecomposition did not converge")]
    ConvergenceFailure,
    #[error("too few antennas: {antennas} elements for {sources} sources")]
    TooFewAntennas { antennas: usize, sources: usize },
    #[error("search grid is empty")]
    GridEmpty,
    #[error("sub-block {sub_n}x{sub_m} does not fit a {n}x{m} response")]
    DegenerateSubblock {
        sub_n: usize,
        sub_m: usize,
        n: usize,
        m: usize,
    },
    #[error("innovation covariance is singular")]
    SingularInnovation,
    #[error("Fisher information matrix is singular")]
    SingularFim,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
