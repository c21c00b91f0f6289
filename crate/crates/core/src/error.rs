use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse grouping used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input: malformed matrices, violated preconditions.
    Validation,
    /// The numerics gave up: step size, degenerate constraints, lost positivity.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("validation error: {0}")]
    Validation(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("norm drift {drift:.3e} in one step at t = {t} exceeds {limit:.1e}; reduce dt")]
    StepSize { drift: f64, limit: f64, t: f64 },

    #[error("degenerate constraint: {0}")]
    DegenerateConstraint(String),

    #[error("eigenvalue {0:.3e} is below the clipping floor")]
    NegativeEigenvalue(f64),

    #[error("subspace invariance violated: {0}")]
    InvarianceViolation(String),

    #[error("time ordering error: {0}")]
    TimeOrdering(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Validation(_)
            | Error::DimensionMismatch { .. }
            | Error::InvarianceViolation(_)
            | Error::TimeOrdering(_) => ErrorClass::Validation,
            Error::StepSize { .. } | Error::DegenerateConstraint(_) | Error::NegativeEigenvalue(_) => {
                ErrorClass::Numerical
            }
        }
    }

    /// Short machine-readable tag.
    pub fn tag(&self) -> &'static str {
        match self {
            Error::Validation(_) => "validation",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::StepSize { .. } => "step_size",
            Error::DegenerateConstraint(_) => "degenerate_constraint",
            Error::NegativeEigenvalue(_) => "negative_eigenvalue",
            Error::InvarianceViolation(_) => "invariance_violation",
            Error::TimeOrdering(_) => "time_ordering",
        }
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
