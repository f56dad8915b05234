use thiserror::Error;

/// Errors produced by the estimation toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("matrix is not symmetric: asymmetry {asymmetry:.3e} exceeds tolerance {tol:.3e}")]
    NotSymmetric { asymmetry: f64, tol: f64 },

    #[error("matrix is not positive semidefinite: min eigenvalue {min_eig:.3e}")]
    NotPsd { min_eig: f64 },

    #[error("comparison pair ({i}, {j}) invalid for {n} items")]
    InvalidPair { i: usize, j: usize, n: usize },

    #[error("ordered pair ({i}, {j}) appears more than once")]
    DuplicatePair { i: usize, j: usize },

    #[error("{0} must not be empty")]
    EmptyInput(&'static str),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("singular linear system: {0}")]
    SingularSystem(String),

    #[error("rejection sampling failed after {0} attempts")]
    MaxRejectsExceeded(usize),
}

pub type Result<T> = std::result::Result<T, Error>;
