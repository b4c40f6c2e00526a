use thiserror::Error;

/// Errors raised across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not rank one (lambda2/lambda1 = {ratio:.3e})")]
    NotRankOne { ratio: f64 },

    #[error("dual constructions are only available for the slope band [0, 1], got [{mu}, {nu}]")]
    UnsupportedBand { mu: f64, nu: f64 },

    #[error("primal and dual both reported feasible; tolerances are too loose ({0})")]
    ToleranceConflict(String),

    #[error("solver returned a point that fails independent re-checking: {0}")]
    SolverInconsistency(String),

    #[error("inconsistent witness: {0}")]
    InconsistentWitness(String),

    #[error("algebraic loop z = Cx + D phi(z) could not be solved: {0}")]
    WellPosedness(String),

    #[error("operation requires a planar system (n = 2), got n = {0}")]
    UnsupportedDimension(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidInput(msg.into())
}
