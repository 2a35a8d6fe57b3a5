use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },

    #[error("rank deficient: {0}")]
    RankDeficient(String),

    #[error("constraint violation: {0}")]
    ConstraintViolation(String),

    #[error("degenerate links: {0}")]
    Degenerate(String),

    #[error("solver did not converge after {iterations} iterations (penalty {penalty:e})")]
    NotConverged { iterations: usize, penalty: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn mismatch(op: &'static str, detail: impl Into<String>) -> Error {
    Error::DimensionMismatch {
        op,
        detail: detail.into(),
    }
}
