use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration or specification failed validation.
    #[error("invalid input: {0}")]
    Validation(String),

    /// The adaptive scan needed more field evaluations than allowed.
    #[error("sample budget of {budget} evaluations exceeded (required at least {required})")]
    Budget { budget: u64, required: u64 },

    /// Input data does not have the shape an operation requires.
    #[error("structural error: {0}")]
    Structural(String),

    /// A ratio was requested whose denominator vanishes.
    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
