use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("parameter vectors must have even length, got {0}")]
    OddLength(usize),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("device {0} has an empty dataset")]
    EmptyDataset(usize),

    #[error("mini-batch is empty")]
    EmptyBatch,

    #[error("invalid energy profile `{0}`")]
    InvalidProfile(String),

    #[error("iteration index must strictly increase (previous {previous}, got {current})")]
    NonMonotoneTime { previous: u64, current: u64 },

    #[error("invalid distance range [{lo}, {hi}]")]
    InvalidDistanceRange { lo: f64, hi: f64 },

    #[error("cooldown multiplier must be positive")]
    NonPositiveCooldown,

    #[error("no device participated, round skipped")]
    RoundSkipped,

    #[error("learning rate {lr} outside [0, {max}]")]
    LearningRateOutOfRange { lr: f64, max: f64 },

    #[error("participation rate must be positive")]
    ZeroParticipationRate,

    #[error("invalid value for `{name}`: {reason}")]
    InvalidParameter { name: String, reason: String },

    #[error("config line {line}: {message}")]
    ConfigSyntax { line: usize, message: String },

    #[error("unknown config key `{0}`")]
    UnknownKey(String),

    #[error("training diverged at round {0}")]
    Diverged(u64),

    #[error("toy dataset: {0}")]
    Dataset(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name: name.into(),
            reason: reason.into(),
        }
    }
}
