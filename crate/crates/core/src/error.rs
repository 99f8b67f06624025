use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("embedding dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("embedding for `{identity}` has zero norm")]
    ZeroNorm { identity: String },

    #[error("embedding for `{identity}` is empty")]
    EmptyEmbedding { identity: String },

    #[error("embedding for `{identity}` has a non-finite component at index {index}")]
    NonFiniteComponent { identity: String, index: usize },

    #[error("duplicate embedding record for `{identity}` (records {first} and {second})")]
    DuplicateRecord {
        identity: String,
        first: usize,
        second: usize,
    },

    #[error("need at least {needed} embeddings, got {got}")]
    TooFewEmbeddings { needed: usize, got: usize },

    #[error("no genuine pairs can be built: no identity has two or more embeddings")]
    NoGenuinePairs,

    #[error("invalid score {score} for pair ({identity_a}, {identity_b}): must be finite and within [-1, 1]")]
    InvalidScore {
        identity_a: String,
        identity_b: String,
        score: f64,
    },

    #[error("genuine pair must share one identity, got ({identity_a}, {identity_b})")]
    GenuineIdentityMismatch {
        identity_a: String,
        identity_b: String,
    },

    #[error("score list is empty")]
    EmptyScores,

    #[error("rates undefined: {0}")]
    MissingClass(&'static str),

    #[error("invalid threshold grid: {0}")]
    InvalidGrid(String),

    #[error("invalid partition: {0}")]
    InvalidPartition(String),

    #[error("identity `{0}` does not start with a letter A-Z")]
    NonAlphabeticIdentity(String),

    #[error("only {valid} group(s) satisfy the validity policy, need at least 2 (excluded: {excluded:?})")]
    TooFewValidGroups { valid: usize, excluded: Vec<String> },

    #[error("empty sample")]
    EmptySample,

    #[error("non-finite value in sample")]
    NonFiniteSample,

    #[error("invalid metric matrix: {0}")]
    InvalidMatrix(String),

    #[error("alpha must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),

    #[error("no threshold in the grid produced a valid analysis")]
    AllThresholdsInvalid,

    #[error("bootstrap needs at least one resample")]
    NoResamples,

    #[error("series mismatch: {0}")]
    SeriesMismatch(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSynthSpec(String),
    #[error("configuration error: {0}")]
    Config(String),

    #[error("truncated sampling for group `{group}` exhausted its retry budget")]
    SamplingBudgetExhausted { group: String },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}: {message}")]
    File { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
