use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QbcError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("grid too narrow: boundary amplitude {ratio:.3e} of peak exceeds {limit:.0e}")]
    GridTooNarrow { ratio: f64, limit: f64 },

    #[error("degenerate pattern: {0}")]
    DegeneratePattern(String),

    #[error("configuration guard tripped: {0}")]
    ConfigGuard(String),

    #[error("private state has no datum for detected trial {0}")]
    StateMismatch(u64),

    #[error("transcript session {transcript} does not match unveil session {unveil}")]
    SessionMismatch { transcript: String, unveil: String },

    #[error("no honest quantile calibration for config {0}")]
    UncalibratedQuantiles(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("serialization error: {0}")]
    Serialization(String),

    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl From<std::io::Error> for QbcError {
    fn from(e: std::io::Error) -> Self {
        QbcError::Io(e.to_string())
    }
}

impl From<serde_json::Error> for QbcError {
    fn from(e: serde_json::Error) -> Self {
        QbcError::Serialization(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, QbcError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(QbcError::InvalidParams(msg.into()))
}
