use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Bad configuration key or value. `line` is 0 when the value came from
    /// a command-line override or a programmatic builder.
    #[error("config error at line {line}, key `{key}`: {msg}")]
    Config {
        key: String,
        line: usize,
        msg: String,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid state: column {column} decreases by {drop:e} at v-index {index} (tolerance {tol:e})")]
    InvalidState {
        column: usize,
        index: usize,
        drop: f64,
        tol: f64,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("CFL violation: dt = {dt:e} exceeds stable limit {limit:e}")]
    Stability { dt: f64, limit: f64 },

    #[error("kernel under-resolved: eps = {eps} needs at least 2 cells (dx = {dx})")]
    Resolution { eps: f64, dx: f64 },

    #[error("outside validity range: {0}")]
    OutOfValidity(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(key: impl Into<String>, line: usize, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            line,
            msg: msg.into(),
        }
    }
}
