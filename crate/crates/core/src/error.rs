use thiserror::Error;

/// Errors produced by the simulator, solvers, and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A policy tried to read traffic that has not been revealed yet.
    #[error("lookahead: traffic at t={requested} requested while only t<{current} is revealed")]
    Lookahead { requested: usize, current: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn shape_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Shape(msg.into()))
}

pub(crate) fn param_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Parameter(msg.into()))
}
