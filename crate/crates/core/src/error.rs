use thiserror::Error;

use crate::spectrum::ConvergenceRow;

#[derive(Debug, Error)]
pub enum Error {
    #[error("target precision must be at least one digit")]
    ZeroPrecision,

    #[error("invalid decimal number `{0}`")]
    InvalidDecimal(String),

    #[error(
        "coupling constant λ = {0} is negative: for λ < 0 the potential is unbounded below, \
         the discrete spectrum disappears (Dyson instability) and no bound states exist"
    )]
    NegativeCoupling(String),

    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: String },

    #[error("requested {requested} eigenvalues of a {dim}x{dim} matrix")]
    LevelOutOfRange { requested: usize, dim: usize },

    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid banded matrix: {0}")]
    InvalidMatrix(String),

    #[error(
        "inverse iteration did not converge for value {value}: residual {residual} \
         (the value is probably not an eigenvalue to the requested precision)"
    )]
    EigenvectorNotConverged { value: String, residual: String },

    #[error("energies not converged to {digits} digits by order {n_max}")]
    NotConverged {
        digits: u32,
        n_max: usize,
        last_rows: Vec<ConvergenceRow>,
    },

    #[error("invalid solve request: {0}")]
    InvalidRequest(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid fit input: {0}")]
    InvalidFit(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
