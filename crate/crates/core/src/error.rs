use std::path::PathBuf;

use thiserror::Error;

use crate::types::EntitySpan;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("spans {0:?} and {1:?} share a token")]
    OverlappingSpans(EntitySpan, EntitySpan),

    #[error("span {span:?} does not fit a sentence of {len} tokens")]
    SpanOutOfBounds { span: EntitySpan, len: usize },

    #[error("sentence has no tokens")]
    EmptySentence,

    #[error("sentence has {len} tokens, max_len is {max_len}")]
    SentenceTooLong { len: usize, max_len: usize },

    #[error("relation id {id} out of range for {n_relations} relations")]
    UnknownRelation { id: usize, n_relations: usize },

    #[error("duplicate relation name `{0}`")]
    DuplicateRelation(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("no tag predictions for target relation {0}")]
    MissingRelation(usize),

    #[error("total loss became non-finite at epoch {epoch}, step {step}")]
    DivergedLoss { epoch: usize, step: usize },

    #[error("single-sequence tagging cannot represent sentence `{id}`: {reason}")]
    SingleTaggingConflict { id: String, reason: String },

    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("cannot resolve entity `{entity}` in record {record}")]
    UnresolvableEntity { record: usize, entity: String },

    #[error("infeasible synthetic config: {0}")]
    InfeasibleConfig(String),

    #[error("sentence id mismatch: prediction `{pred}` vs gold `{gold}`")]
    IdMismatch { pred: String, gold: String },

    #[error("predictions lack intermediate outputs for sentence `{0}`")]
    MissingIntermediates(String),

    #[error("checkpoint format {found} is not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("config error in {path}: {message}")]
    Config { path: PathBuf, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
