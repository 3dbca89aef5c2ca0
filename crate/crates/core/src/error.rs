use thiserror::Error;

/// Errors raised by the solvers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Shapes of the inputs do not agree, or an index is out of range.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// A numeric parameter lies outside its admissible range.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },
    /// The parameter combination is excluded by construction (e.g. m = 2 radius schedule).
    #[error("unsupported: {0}")]
    Unsupported(String),
    /// An oracle refused to run because its size guard was exceeded.
    #[error("refused: {0}")]
    Refused(String),
    /// A constraint set is empty.
    #[error("infeasible: {0}")]
    Infeasible(String),
    /// A linear program is unbounded.
    #[error("unbounded linear program")]
    Unbounded,
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn dim(msg: impl Into<String>) -> Self {
        Error::Dimension(msg.into())
    }
}
