use alloc::string::String;

/// Errors produced anywhere in the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("dimension must be positive")]
    ZeroDimension,
    #[error("coordinate {index} is not finite")]
    NonFinite { index: usize },
    #[error("center set is empty")]
    EmptyCenters,
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("invalid weight {weight} at index {index}; weights must be finite and positive")]
    InvalidWeight { index: usize, weight: f64 },
    #[error("brute force is limited to {max} points, got {len}")]
    TooLarge { len: usize, max: usize },
    #[error("cannot split {points} points over {machines} machines")]
    BadMachineCount { machines: usize, points: usize },
    #[error("logarithm argument {log_arg} must exceed 1")]
    DegenerateConstants { log_arg: f64 },
    #[error("no progress after {rounds} loop rounds: {remaining} points remain, capacity {eta}")]
    RoundLimitExceeded { rounds: usize, remaining: usize, eta: f64 },
    #[error("coordinator received an empty sample")]
    EmptySample,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
