use thiserror::Error;

/// Errors raised by the destriping library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum DestripeError {
    #[error("dimension mismatch in {op}: {detail}")]
    Dimension { op: &'static str, detail: String },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("contract violation: {0}")]
    Contract(String),

    /// A PMM step whose inner solve met its stopping rule still failed the
    /// sufficient-descent inequality.
    #[error(
        "descent violated at outer iteration {iteration}: g(s_next) + step term = {lhs:.12e} > g(s_prev) + slack = {rhs:.12e}"
    )]
    DescentViolation { iteration: usize, lhs: f64, rhs: f64 },
}

pub type Result<T> = std::result::Result<T, DestripeError>;

pub(crate) fn dim_err(op: &'static str, detail: impl Into<String>) -> DestripeError {
    DestripeError::Dimension {
        op,
        detail: detail.into(),
    }
}
