use thiserror::Error;

/// Crate-wide error type.
///
/// Variants map onto the CLI exit codes: configuration problems exit with 1,
/// data problems with 2, numeric failures with 3.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("argument error: {0}")]
    Argument(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("partition error: {0}")]
    Partition(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("insufficient history: {0}")]
    InsufficientHistory(String),
    #[error("comparison error: {0}")]
    Comparison(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    TrainingDiverged { epoch: usize },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 config, 2 data, 3 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_) | Error::Config(_) | Error::Partition(_) => 1,
            Error::Shape(_)
            | Error::Data(_)
            | Error::InsufficientHistory(_)
            | Error::Comparison(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => 2,
            Error::Numeric(_) | Error::TrainingDiverged { .. } => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
