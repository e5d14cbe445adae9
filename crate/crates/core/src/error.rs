use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input violates an operation's precondition.
    #[error("precondition failed: {0}")]
    Precondition(String),

    /// A bridge configuration is not a valid realization on its lattice.
    #[error("malformed bridge configuration: {0}")]
    Malformed(String),

    /// The requested dense operator exceeds the dimension budget.
    #[error("dimension {dim} exceeds the budget of {max}")]
    DimensionBudget { dim: usize, max: usize },

    /// A ratio estimator had a batch with zero weight or too few effective samples.
    #[error("under-sampled: {0}")]
    UnderSampled(String),

    /// Decay fit could not be performed.
    #[error("fit failed: {0}")]
    Fit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    /// A verification link failed.
    #[error("acceptance failure: {0}")]
    Acceptance(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn pre(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
