use thiserror::Error;

/// Errors surfaced by the simulator, optimizer and experiment driver.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error("invalid value for `{key}`: {reason}")]
    InvalidValue { key: String, reason: String },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("singular system in {0}")]
    Singular(&'static str),

    #[error("problem too large for the dense oracle: {variables} variables (limit {limit})")]
    DimensionGuard { variables: usize, limit: usize },

    #[error("training diverged in round {round}: non-finite loss for client {client}")]
    Diverged { round: usize, client: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim_err(context: &'static str, expected: impl ToString, found: impl ToString) -> Error {
    Error::DimensionMismatch {
        context,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
