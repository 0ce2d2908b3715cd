use std::fmt;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("budget exceeded: {0}")]
    Budget(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("eigensolver stopped after {iterations} iterations with residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("ambiguous unique decoding: {0}")]
    Ambiguous(String),
    #[error("stage failed: {0}")]
    Stage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl fmt::Display) -> Self {
        Error::Invalid(msg.to_string())
    }

    /// Process exit code used by the command line tool.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::NotConverged { .. } | Error::Ambiguous(_) | Error::Stage(_) => 3,
            _ => 2,
        }
    }
}
