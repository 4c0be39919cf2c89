use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid model, cone, or experiment parameters.
    #[error("configuration error: {0}")]
    Config(String),

    /// An operation was called on inputs violating its precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// An iterative solve failed to reach the requested residual.
    #[error("no convergence after {sweeps} sweeps (residual {residual:e})")]
    NonConvergence { sweeps: usize, residual: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}
