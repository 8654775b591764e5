use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("continuation policy violation: {0}")]
    Policy(String),

    #[error("degenerate sample: {0}")]
    Degenerate(String),

    #[error("unsupported oracle: {0}")]
    UnsupportedOracle(String),

    #[error("{failed} of {total} simulations failed, aborting")]
    TooManyFailures { failed: usize, total: usize },

    #[error("malformed CSV at row {row}: {message}")]
    MalformedRow { row: usize, message: String },

    #[error("incompatible runs: {0} differs")]
    Incompatible(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::TooManyFailures { .. } => 3,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
