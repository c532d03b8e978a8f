use thiserror::Error;

/// Errors shared by all modules of the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied value violates an operation's preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A requested computation exceeds the enumerable or representable budget.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A hypothesis required by an estimate was checked against the data and
    /// failed. Distinct from `InvalidInput`: the call was well-formed, the
    /// measured quantities just do not satisfy the gate.
    #[error("hypothesis gate failed: {0}")]
    Gate(String),

    /// Malformed configuration input.
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Error {
        Error::InvalidInput(msg.into())
    }

    pub fn capacity(msg: impl Into<String>) -> Error {
        Error::Capacity(msg.into())
    }

    pub fn gate(msg: impl Into<String>) -> Error {
        Error::Gate(msg.into())
    }

    /// Short machine-readable kind tag, used by the CLI for exit codes and
    /// error reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::Capacity(_) => "capacity",
            Error::Gate(_) => "gate",
            Error::Config(_) => "config",
        }
    }
}
