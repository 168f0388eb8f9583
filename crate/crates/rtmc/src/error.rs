//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("constraint Jacobian is rank deficient (Gram condition {cond:.3e})")]
    SingularConstraint { cond: f64 },

    #[error("point is off the manifold: constraint residual {residual:.3e} exceeds {tol:.3e}")]
    OffManifold { residual: f64, tol: f64 },

    #[error("constraint solve failed to converge at chain step {step}")]
    ShakeDiverged { step: usize },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not symmetric positive definite in {0}")]
    NotSpd(&'static str),

    #[error("matrix is not symmetric (asymmetry {0:.3e})")]
    NotSymmetric(f64),

    #[error("lag cap {max_lag} must be below series length {len}")]
    LagTooLarge { max_lag: usize, len: usize },

    #[error("series too short: need at least {need} values, got {got}")]
    SeriesTooShort { need: usize, got: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error in {path} row {row}: {message}")]
    DataParse {
        path: String,
        row: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("eigendecomposition failed in {0}")]
    EigenFailure(&'static str),
}
