use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("cannot parse distribution `{input}`: {reason}")]
    Parse { input: String, reason: String },

    #[error("distribution {0} has infinite mean")]
    InfiniteMean(String),

    #[error("unstable model: rho = {rho:.6} (must be < 1)")]
    Instability { rho: f64 },

    #[error("replication exceeded the event budget of {budget} events")]
    EventBudgetExceeded { budget: u64 },

    #[error("forced jump unreachable: trace ended before cycle {cycle}, position {position}")]
    ForcedIndexUnreachable { cycle: usize, position: usize },

    #[error("service law {0} is not regularly varying")]
    RvRequired(String),

    #[error("x grid is empty")]
    EmptyGrid,

    #[error("x grid must be sorted ascending")]
    UnsortedGrid,

    #[error("no samples")]
    EmptySample,

    #[error("cycles were simulated without attribution")]
    MissingAttribution,

    #[error("traces were simulated without per-cycle service times")]
    TraceTooLean,

    #[error("prediction is zero at x = {x}")]
    ZeroPrediction { x: f64 },

    #[error("config error in `{key}`: {message}")]
    Config { key: String, message: String },

    #[error("{dropped} of {total} replications exceeded the event budget")]
    TooManyDropped { dropped: u64, total: u64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
