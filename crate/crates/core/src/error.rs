use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("header line {line}: {message}")]
    HeaderParse { line: usize, message: String },

    #[error("unsupported WFDB storage format {0}")]
    UnsupportedFormat(u16),

    #[error("truncated frame at byte offset {offset}")]
    TruncatedFrame { offset: usize },

    #[error("record {record}: {message}")]
    Record { record: String, message: String },

    #[error("expected 12 leads, found {0}")]
    LeadCount(usize),

    #[error("unknown lead name {0:?}")]
    UnknownLead(String),

    #[error("csv row {row}: {message}")]
    CsvCell { row: usize, message: String },

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("cohort empty after filtering")]
    EmptyCohort,

    #[error("cannot split cohort: {0}")]
    Split(String),

    #[error("sampling rate {fs} Hz is too low for a {edge} Hz band edge")]
    SamplingRate { fs: f64, edge: f64 },

    #[error("no beats detected")]
    NoBeats,

    #[error("record too short after exclusion ({peaks} R peaks)")]
    TooFewBeats { peaks: usize },

    #[error("unknown feature name {0:?}")]
    UnknownFeature(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("training data must contain both classes")]
    SingleClass,

    #[error("query already classified as target")]
    AlreadyTarget,

    #[error("no valid counterfactual within budget ({found} found, best target probability {best_probability:.4})")]
    NoValidCounterfactual { found: usize, best_probability: f64 },

    #[error("provenance mismatch: {0}")]
    Provenance(String),

    #[error("missing {what} for feature {feature:?}")]
    MissingFeatureData { what: &'static str, feature: String },

    #[error("score {0} out of range 0..=5")]
    ScoreRange(u32),

    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
