use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("topology error: {0}")]
    Topology(String),

    /// The requested operating point cannot be realized (rate too low for any
    /// nonzero level, bit budget too small for one bit per measurement, ...).
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("solver diverged: {0}")]
    Divergence(String),

    #[error("instance exceeds brute-force guard: {0}")]
    Guard(String),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Param(msg.into()))
}
