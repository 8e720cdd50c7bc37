use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: {left} vs {right}")]
    DimensionMismatch {
        context: &'static str,
        left: String,
        right: String,
    },

    #[error("operator is not Hermitian: max|A - A†| = {asymmetry:.3e} (allowed {allowed:.3e})")]
    NotHermitian { asymmetry: f64, allowed: f64 },

    #[error("eigensolver failed to converge for a {dim}x{dim} matrix")]
    EigenFailure { dim: usize },

    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("position {r} is not in the evaluation set")]
    OutsideEvaluationSet { r: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported representation: {0}")]
    Unsupported(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape(rows: usize, cols: usize) -> String {
    format!("{rows}x{cols}")
}
