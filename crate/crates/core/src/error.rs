use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid privacy parameters: {0}")]
    InvalidPrivacy(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("ledger label `{0}` already used in this run")]
    DuplicateLabel(String),

    #[error("no registered budget for query `{0}`")]
    UnregisteredBudget(String),

    #[error("ledger entries are not homogeneous; advanced composition needs identical (epsilon, delta)")]
    HeterogeneousLedger,

    #[error("missing client-level clip bound for query `{0}`")]
    MissingClipBound(String),

    #[error("operation requires client-level privacy")]
    RequiresClientUnit,

    #[error("all weights are zero or negative")]
    ZeroWeights,

    #[error("enumeration guard: n = {n}, k = {k} exceeds n <= 12, k <= 3")]
    TooLargeForBruteForce { n: usize, k: usize },

    #[error("malformed matrix file: {0}")]
    Malformed(String),

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
