use thiserror::Error;

/// A configuration whose force law has no finite value.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Singularity {
    #[error("collision between bodies {i} and {j}")]
    Collision { i: usize, j: usize },
    #[error("antipodal configuration of bodies {i} and {j} on the sphere")]
    Antipodal { i: usize, j: usize },
    #[error("size factor rho = {rho} is not positive")]
    ZeroSize { rho: f64 },
    #[error("{0}")]
    Other(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("infeasible constraint: {0}")]
    Infeasible(String),
    #[error("criterion violated: {0}")]
    Criterion(String),
    #[error("singularity: {0}")]
    Singularity(#[from] Singularity),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension { expected, found })
    }
}
