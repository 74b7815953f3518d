use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("invalid language code {0:?}: must be non-empty lowercase alphanumeric, at most 8 chars")]
    InvalidLanguageCode(String),

    #[error("text contains reserved token {0:?}")]
    ReservedToken(String),

    #[error("corpus {0:?} has no usable sentences")]
    EmptyCorpus(String),

    #[error("corpus has {have} sentences, need at least {need}")]
    CorpusTooShort { have: usize, need: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("misaligned inputs: {0}")]
    Misaligned(String),

    #[error("unknown language code {0:?}")]
    UnknownLanguage(String),

    #[error("unknown parameter group {0:?}")]
    UnknownGroup(String),

    #[error("token id {id} out of range (vocab size {vocab})")]
    TokenOutOfRange { id: u32, vocab: usize },

    #[error("sequence length {len} exceeds max positions {max}")]
    SequenceTooLong { len: usize, max: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("training diverged at step {step}: loss is not finite")]
    Divergence { step: u64 },

    #[error("checkpoint format error: {0}")]
    CheckpointFormat(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CoreError {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        CoreError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
