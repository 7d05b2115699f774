use thiserror::Error;

/// Errors raised by the numeric kernels, estimators and the trial engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A series was truncated at `terms` without meeting the tolerance.
    #[error("series did not converge after {terms} terms (partial sum {partial_sum:e})")]
    Convergence { partial_sum: f64, terms: usize },

    /// Adaptive quadrature exhausted its interval budget.
    #[error("quadrature failed on [{lower}, {upper}]: estimate {estimate:e}, error {abs_error:e} after {intervals} intervals")]
    Quadrature {
        lower: f64,
        upper: f64,
        estimate: f64,
        abs_error: f64,
        intervals: usize,
    },

    /// The caller violated an operation's precondition.
    #[error("usage error: {0}")]
    Usage(String),

    /// A design or sampling configuration is invalid or unusable.
    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn usage(msg: impl Into<String>) -> Error {
    Error::Usage(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
