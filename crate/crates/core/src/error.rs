use thiserror::Error;

pub type Result<T, E = EwlError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EwlError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// A truncated series ran out of terms, or lost too much precision to
    /// cancellation. Callers with a quadrature twin fall back on this.
    #[error("series did not converge after {terms} terms ({reason})")]
    NonConvergence { terms: usize, reason: String },

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("optimizer did not converge: {0}")]
    Optimizer(String),

    #[error("{null} is not nested in {alt}")]
    Nesting { null: String, alt: String },

    #[error("observed information is not positive definite")]
    SingularInformation,

    #[error("degenerate input: {0}")]
    Degenerate(String),
}

impl EwlError {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        EwlError::Domain(msg.into())
    }
}
