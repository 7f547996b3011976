use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("power iteration did not converge after {iterations} iterations (last estimate {estimate})")]
    NoConvergence { iterations: usize, estimate: f64 },

    #[error("solver diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("linear program is infeasible")]
    Infeasible {
        /// Farkas certificate `y` with `A^T y <= 0` and `b^T y > 0`.
        certificate: Vec<f64>,
    },

    #[error("problem size {size} exceeds the oracle bound {bound}")]
    SizeBound { size: usize, bound: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("target gradient sparsity {target} not reached (achieved {achieved})")]
    SparsityTarget { target: usize, achieved: usize },

    #[error("curve error: {0}")]
    Curve(String),

    #[error("value outside curve support: {0}")]
    OutsideSupport(f64),

    #[error("missing results for cells {0:?}")]
    MissingCells(Vec<(usize, usize)>),

    #[error("checkpoint mismatch: {0}")]
    Checkpoint(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}
