use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("malformed results file: {0}")]
    Format(String),
    #[error(transparent)]
    Core(#[from] feddp_core::Error),
}

impl BenchError {
    /// Process exit code for the CLI: 2 for config problems, 3 for I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) => 2,
            BenchError::Io(_) | BenchError::Format(_) => 3,
            BenchError::Core(feddp_core::Error::Io(_) | feddp_core::Error::Malformed(_)) => 3,
            BenchError::Core(feddp_core::Error::InvalidArgument(_) | feddp_core::Error::InvalidPrivacy(_)) => 2,
            BenchError::Core(_) => 1,
        }
    }
}

impl From<std::io::Error> for BenchError {
    fn from(e: std::io::Error) -> Self {
        BenchError::Io(e.to_string())
    }
}

impl From<csv::Error> for BenchError {
    fn from(e: csv::Error) -> Self {
        if e.is_io_error() {
            BenchError::Io(e.to_string())
        } else {
            BenchError::Format(e.to_string())
        }
    }
}

impl From<serde_json::Error> for BenchError {
    fn from(e: serde_json::Error) -> Self {
        BenchError::Format(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
