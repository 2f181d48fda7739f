use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("cube is not aligned with the grid lattice: {0}")]
    Misaligned(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no convergence: {0}")]
    NonConvergence(String),

    #[error("kernel is singular at {0}")]
    Singular(String),

    #[error("divergent: {0}")]
    Divergent(String),

    #[error("point {0} is not covered by any cube of the family")]
    Uncovered(usize),

    #[error("hypothesis not met: {0}")]
    HypothesisUnmet(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
