use thiserror::Error;

/// Errors raised across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad arguments: invalid indices, out-of-range parameters, malformed keywords.
    #[error("usage error: {0}")]
    Usage(String),

    /// Incompatible combination of components (e.g. Frank-Wolfe on a non-smooth reward).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("instance not communicating: {0}")]
    NotCommunicating(String),

    #[error("EVI non-convergent after {iterations} iterations (likely non-communicating optimistic model)")]
    EviNonConvergent { iterations: usize },

    /// A deterministic episode-count bound was exceeded. This indicates a bug.
    #[error("episode count {episodes} exceeds the certainty bound {bound:.3} at t = {t}")]
    EpisodeBound { t: u64, episodes: usize, bound: f64 },

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Usage(msg.into()))
}
