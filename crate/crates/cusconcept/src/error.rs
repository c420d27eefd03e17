//! Crate-wide error type and the stable exit-code mapping used by the CLI.

use thiserror::Error;

/// State recovered from an aborted training run.
///
/// Carried inside [`Error::TrainingDiverged`] so callers can persist the last
/// finite iterate instead of losing the whole run.
#[derive(Debug)]
pub enum DivergedState {
    /// Weight tables and centroids from the last finite decomposition step.
    Decomposition(Box<crate::stage1::Stage1Output>),
    /// Concept tokens from the last finite refinement step.
    Refinement(Vec<crate::stage2::ConceptToken>),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("word {word:?} does not map to a single token (got {count} tokens)")]
    MultiTokenWord { word: String, count: usize },

    #[error("unknown token surface {surface:?}")]
    UnknownToken { surface: String },

    #[error("placeholder {surface:?} is already registered")]
    DuplicatePlaceholder { surface: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("timestep {t} outside schedule range 0..{max}")]
    InvalidTimestep { t: usize, max: usize },

    #[error("invalid image: {reason}")]
    InvalidImage { reason: String },

    #[error("vocabulary is empty")]
    EmptyVocabulary,

    #[error("vocabulary unavailable for {what}: {reason}")]
    VocabularyUnavailable { what: String, reason: String },

    #[error("corrupt vocabulary cache at {path}: {reason}")]
    CacheCorrupt { path: String, reason: String },

    #[error("training diverged at step {step}")]
    TrainingDiverged { step: usize, last_good: DivergedState },

    #[error("ground-truth labels required but not provided")]
    MissingLabels,

    #[error("unsupported bundle format version {found} (supported: {supported})")]
    UnsupportedBundleVersion { found: u32, supported: u32 },

    #[error("corrupt bundle at {path}: {reason}")]
    CorruptBundle { path: String, reason: String },

    #[error("invalid request: {reason}")]
    InvalidRequest { reason: String },

    #[error("invalid label {label:?}: {reason}")]
    InvalidLabel { label: String, reason: String },

    #[error("missing asset: {path}")]
    MissingAsset { path: String },

    #[error("bundle has no trained weight tables")]
    NotTrained,

    #[error("backend unavailable: {reason}")]
    BackendUnavailable { reason: String },

    #[error("configuration error: {reason}")]
    Config { reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Stable process exit code for this error family.
    ///
    /// 2  usage / invalid request (matches clap's own usage-error code)
    /// 3  io / missing files or assets
    /// 4  corrupt or unsupported artifacts (bundles, caches)
    /// 5  vocabulary acquisition failure
    /// 6  training diverged
    /// 7  dataset / label validation failure
    /// 8  backend or encoder unavailable
    /// 9  contract violation (dimension, token, timestep errors)
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidRequest { .. } | Error::Config { .. } => 2,
            Error::Io(_) | Error::MissingAsset { .. } | Error::InvalidImage { .. } => 3,
            Error::CorruptBundle { .. }
            | Error::UnsupportedBundleVersion { .. }
            | Error::CacheCorrupt { .. }
            | Error::Json(_) => 4,
            Error::VocabularyUnavailable { .. } | Error::EmptyVocabulary => 5,
            Error::TrainingDiverged { .. } => 6,
            Error::InvalidLabel { .. } | Error::MissingLabels | Error::NotTrained => 7,
            Error::BackendUnavailable { .. } => 8,
            Error::MultiTokenWord { .. }
            | Error::UnknownToken { .. }
            | Error::DuplicatePlaceholder { .. }
            | Error::DimensionMismatch { .. }
            | Error::InvalidTimestep { .. } => 9,
        }
    }
}
