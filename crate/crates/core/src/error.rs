use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    Dimension {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("{context} needs at least {required} samples, got {found}")]
    InsufficientSamples {
        context: &'static str,
        required: usize,
        found: usize,
    },

    #[error("covariance matrix is not symmetric positive semi-definite")]
    NotPositiveSemiDefinite,

    #[error("Hermite order {0} is outside the supported range 0..=6")]
    HermiteOrder(usize),

    #[error("difference column {index} is zero: paired draws coincide")]
    DegenerateDifference { index: usize },

    #[error("estimator `{estimator}` requires {requirement}")]
    Precondition {
        estimator: &'static str,
        requirement: String,
    },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    Invalid(String),
}

impl Error {
    pub(crate) fn dims(context: &'static str, expected: impl std::fmt::Display, found: impl std::fmt::Display) -> Self {
        Error::Dimension {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
