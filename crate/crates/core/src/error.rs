use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("argument {value} outside [0, 1]")]
    Domain { value: f64 },

    #[error("invalid offspring law: {0}")]
    InvalidLaw(String),

    #[error("invalid environment entry {index}: {reason}")]
    InvalidEntry { index: usize, reason: String },

    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),

    #[error("index out of horizon: {0}")]
    Horizon(String),

    #[error("degenerate environment: {0}")]
    Degenerate(String),

    #[error("law at generation {generation} is not linear fractional")]
    NotLinearFractional { generation: i64 },

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("inconsistent state: {0}")]
    InconsistentState(String),

    #[error("enumeration guard: {0}")]
    EnumerationGuard(String),

    #[error("attempt cap of {0} exceeded while conditioning on survival")]
    AttemptCap(u64),

    #[error("tree exceeds the node budget of {0}")]
    TreeTooLarge(usize),

    #[error("identity check failed: {0}")]
    Mismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
