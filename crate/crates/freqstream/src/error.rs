use thiserror::Error;

/// Unified error type for the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in `{op}`: {detail}")]
    ShapeMismatch { op: String, detail: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("signal of length {len} too short for {requested} decomposition levels (max admissible: {max_levels})")]
    SignalTooShort {
        len: usize,
        requested: usize,
        max_levels: usize,
    },

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("constant channel `{0}` cannot be standardized (zero variance)")]
    ConstantChannel(String),

    #[error("checkpoint inventory mismatch at parameter `{0}`: {1}")]
    InventoryMismatch(String, String),

    #[error("training diverged at epoch {epoch}, batch {batch}: non-finite loss")]
    Divergence { epoch: usize, batch: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
