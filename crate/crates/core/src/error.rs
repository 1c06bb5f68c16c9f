use thiserror::Error;

/// Which post-trade wealth argument of the expected utility went non-positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WealthBranch {
    /// Cash plus contract payout, the state in which the event occurs.
    Win,
    /// Cash only, the state in which the event does not occur.
    Lose,
}

impl std::fmt::Display for WealthBranch {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WealthBranch::Win => f.write_str("win-state"),
            WealthBranch::Lose => f.write_str("lose-state"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: String, reason: String },

    #[error("wealth must be strictly positive, got {0}")]
    NonPositiveWealth(f64),

    #[error("infeasible order: {branch} wealth {wealth} is not strictly positive")]
    InfeasibleOrder { branch: WealthBranch, wealth: f64 },

    #[error("price {0} is outside the open interval (0, 1)")]
    DegeneratePrice(f64),

    #[error("whale valuations are fixed and cannot be updated")]
    WhaleUpdate,

    #[error("settlement left agent {agent} with negative cash {cash}")]
    NegativeCash { agent: usize, cash: f64 },

    #[error("series lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("regressor has zero variance")]
    DegenerateRegressor,

    #[error("series of length {len} is too short for a lag scan up to {max_lag}")]
    SeriesTooShort { len: usize, max_lag: usize },

    #[error("unknown sweep parameter `{0}`")]
    UnknownParameter(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidConfig {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
