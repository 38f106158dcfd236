use std::path::PathBuf;

use crowdirt_core::Error as CoreError;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },
    #[error("{path}:{line}: {message}")]
    Line { path: PathBuf, line: u64, message: String },
    #[error("{0}")]
    Core(CoreError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Json { path: PathBuf, source: serde_json::Error },
}

impl CliError {
    pub fn data(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        CliError::Data { path: path.into(), message: message.into() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Process exit code: 1 usage, 2 data, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data { .. } | CliError::Line { .. } | CliError::Io { .. } | CliError::Json { .. } => 2,
            CliError::Core(e) => match e {
                CoreError::UnknownTag(_)
                | CoreError::DuplicateTag(_)
                | CoreError::RedundantModel { .. }
                | CoreError::InvalidConfig(_) => 1,
                CoreError::EmptyDataset
                | CoreError::InvalidRating { .. }
                | CoreError::IndexOutOfRange { .. }
                | CoreError::DimensionMismatch { .. }
                | CoreError::TooFewDraws { .. }
                | CoreError::TooFewSamples { .. } => 2,
                CoreError::NonFinite(_)
                | CoreError::InitializationFailed { .. }
                | CoreError::StepSize(_)
                | CoreError::DegenerateTail
                | CoreError::NotConverged { .. }
                | CoreError::NotPositiveDefinite => 3,
            },
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Core(e)
    }
}
