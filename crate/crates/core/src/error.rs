use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("AUC is undefined: labels contain a single class")]
    UndefinedAuc,

    #[error("training data from {0} contains a single class")]
    SingleClass(String),

    #[error("feature `{0}` has no observed values in the training rows")]
    FeatureAllMissing(String),

    #[error("external scores have no entry for window {0}")]
    MissingWindow(i64),

    #[error("{source_name}, line {line}: {message}")]
    Parse { source_name: String, line: usize, message: String },

    #[error("drift signal undefined: {0}")]
    DriftUndefined(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub(crate) fn check_lengths(left: usize, right: usize) -> Result<()> {
    if left != right {
        return Err(Error::LengthMismatch { left, right });
    }
    Ok(())
}
