use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{field} {reason}")]
    InvalidParameter { field: String, reason: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("evaluation at a pole: {0}")]
    Pole(String),

    #[error("argument too large: |z| = {modulus:e} exceeds cap {cap:e}")]
    ArgumentTooLarge { modulus: f64, cap: f64 },

    #[error("degenerate mapped poles: {0}")]
    DegeneratePoles(String),

    #[error("partial-fraction coefficients disagree: {0}")]
    CoefficientMismatch(String),

    #[error("did not converge: {0}")]
    NonConvergence(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: &str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field: field.to_string(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by bad user input rather than numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. } | Error::Parse(_) | Error::Precondition(_) | Error::Io(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
