use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Input outside the operation's domain (off-lattice point, length mismatch, ...).
    #[error("domain error: {0}")]
    Domain(String),
    /// The requested quantity is not computable by the given object.
    #[error("capability error: {0}")]
    Capability(String),
    /// Invalid constructor parameters.
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    /// A numerical routine did not reach its tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        field,
        reason: reason.into(),
    }
}
