use thiserror::Error;

/// Errors produced anywhere in the key agreement stack.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("index {index} out of range ({len} entries)")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("schedule contains no type-2 rounds")]
    NoTestRounds,

    #[error("insufficient rounds for parameter estimation: {0}")]
    InsufficientRounds(String),

    #[error("corrupt or unreadable data: {0}")]
    Corrupt(String),

    #[error("no LDPC code rate tolerates corrected QBER {0:.5}")]
    NoCode(f64),

    #[error("belief propagation did not converge within {iterations} iterations")]
    NotConverged { iterations: usize },

    #[error("error correction failed for party {party} on block {block}")]
    EcFailure { party: usize, block: usize },

    #[error("key verification hash mismatch")]
    VerificationFailed,

    #[error("no extractable key: {0}")]
    NoKey(String),

    #[error("protocol is not key-growing: {available} bits available, {required} required")]
    NotKeyGrowing { available: u64, required: u64 },

    #[error("one-time pad refused: {0}")]
    KeyUsage(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

pub(crate) fn check_probability(name: &str, x: f64) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(invalid(format!("{name} = {x} is not a probability")))
    }
}
