use thiserror::Error;

/// Errors raised by the numerical pipelines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("matrix is not square or has a bad shape: {0}")]
    Shape(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix is not Hermitian (defect {0:.3e})")]
    NotHermitian(f64),

    #[error("not a density matrix: {0}")]
    NotDensity(String),

    #[error("function undefined at eigenvalue {0}")]
    UndefinedFunction(f64),

    #[error("functional is unbounded: |Tr X| = {0:.3e}")]
    UnboundedFunctional(f64),

    #[error("operator is singular (smallest singular value {0:.3e})")]
    Singular(f64),

    #[error("support is not contained in the volume: {0}")]
    NotContained(String),

    #[error("resource cap exceeded: {0}")]
    CapExceeded(String),

    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("no feasible certificate: {0}")]
    Infeasible(String),

    #[error("monotonicity violated: {0}")]
    Monotonicity(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("degenerate tilt: normalization {0:.3e} vanishes")]
    DegenerateTilt(f64),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
