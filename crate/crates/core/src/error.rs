use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dataset has no ratings")]
    EmptyDataset,
    #[error("row {row}: rating {value} is not 0 or 1")]
    InvalidRating { row: usize, value: i64 },
    #[error("row {row}: {what} index {index} out of range (size {size})")]
    IndexOutOfRange {
        row: usize,
        what: &'static str,
        index: usize,
        size: usize,
    },
    #[error("unknown model tag '{0}' (expected letters from A-E or \"Full\")")]
    UnknownTag(char),
    #[error("duplicate model tag '{0}'")]
    DuplicateTag(char),
    #[error("model {requested} is a redundant parameterization; use {canonical}")]
    RedundantModel { requested: String, canonical: String },
    #[error("parameter vector has dimension {found}, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("log density is not finite: {0}")]
    NonFinite(&'static str),
    #[error("no finite initial point after {attempts} attempts")]
    InitializationFailed { attempts: usize },
    #[error("step size search failed: {0}")]
    StepSize(&'static str),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("need at least {needed} draws, got {found}")]
    TooFewDraws { needed: usize, found: usize },
    #[error("need at least {needed} samples, got {found}")]
    TooFewSamples { needed: usize, found: usize },
    #[error("all tail samples are equal")]
    DegenerateTail,
    #[error("Newton solver did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NotConverged { iterations: usize, grad_norm: f64 },
    #[error("matrix is not positive definite")]
    NotPositiveDefinite,
}
