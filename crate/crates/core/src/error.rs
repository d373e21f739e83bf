use thiserror::Error;

/// Errors produced by the numerical core.
#[derive(Error, Debug, Clone, PartialEq)]
pub enum CoreError {
    /// A precondition on the inputs was violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A quantity that must stay finite became NaN or infinite.
    #[error("non-finite value in {term} at t={t}")]
    NonFinite { term: &'static str, t: f64 },

    /// A simulated trajectory left the representable range.
    #[error("trajectory blow-up at step {step} (path {path})")]
    BlowUp { step: usize, path: usize },

    /// A reference solution was requested but none is available.
    #[error("no reference solution available for problem '{0}'")]
    MissingReference(String),

    /// Fitting a sampling distribution failed (e.g. degenerate covariance).
    #[error("distribution fit failed: {0}")]
    FitError(String),
}

pub type Result<T> = std::result::Result<T, CoreError>;
