use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed input at row {row}: {message}")]
    MalformedRow { row: usize, message: String },

    #[error("unknown class value {value:?} at row {row}; observed classes: {observed:?}")]
    UnknownClass {
        value: String,
        row: usize,
        observed: Vec<String>,
    },

    #[error("no documents")]
    NoDocuments,

    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),

    #[error("invalid label names: {0}")]
    InvalidLabelNames(String),

    #[error(
        "label names of class {class:?} never occur in the corpus; choose a different label name"
    )]
    NoLabelOccurrences { class: String },

    #[error("invalid synthetic corpus spec: {0}")]
    InvalidSyntheticSpec(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("word position {position} out of range for a sequence with {words} words")]
    PositionOutOfRange { position: usize, words: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("non-finite loss during {stage} at step {step} (lr = {lr:e})")]
    NonFiniteLoss { stage: String, step: usize, lr: f64 },

    #[error("backend failure at occurrence (doc {doc_id}, word {word_index}): {source}")]
    AtOccurrence {
        doc_id: usize,
        word_index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("checkpoint format version mismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("unsupported operation for backend {backend}: {operation}")]
    Unsupported { backend: String, operation: String },

    #[error("category vocabulary for class {class:?} is empty after filtering; use richer label names")]
    EmptyVocabularyClass { class: String },

    #[error("no word-level supervision found")]
    NoSupervision,

    #[error("target row {row} has zero mass")]
    ZeroRow { row: usize },

    #[error("infinite divergence: q > 0 where p = 0 at row {row}, class {class}")]
    InfiniteDivergence { row: usize, class: usize },

    #[error("word {0:?} is missing from the embedding table")]
    MissingEmbedding(String),

    #[error("insufficient labeled documents: {0}")]
    InsufficientLabeled(String),

    #[error("corpus {0:?} has no gold labels")]
    MissingGoldLabels(String),

    #[error("missing artifact {path}; produce it with `{producer}`")]
    MissingArtifact { path: PathBuf, producer: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
