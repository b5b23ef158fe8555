use thiserror::Error;

/// Errors raised by the mechanisms, the verification tools and the
/// experiment harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("offload amount must be nonnegative, got {0}")]
    NegativeOffload(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("instance too large for exact mode: more than {limit} feasible profiles")]
    TooLarge { limit: usize },

    #[error("infeasible instance: {0}")]
    Infeasible(String),

    #[error("passenger {0} has no bid in this profile")]
    UnknownPassenger(usize),

    #[error("population is empty")]
    EmptyPopulation,

    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("line {line}: negative traffic volume {volume}")]
    NegativeVolume { line: u64, volume: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by the instance itself rather than by the
    /// configuration (used by the CLI to pick an exit code).
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Infeasible(_) | Error::TooLarge { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
