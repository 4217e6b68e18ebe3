use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the calibration and analytics pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("header mismatch: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },

    #[error("{rejected} of {total} rows rejected (more than half); first reason: {first_reason}")]
    TooManyRejects {
        rejected: usize,
        total: usize,
        first_reason: String,
    },

    #[error("campaign has no samples")]
    EmptyCampaign,

    #[error("no temporal overlap between node and reference streams")]
    NoTemporalOverlap,

    #[error("series too short: need at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },

    #[error("insufficient overlap for lag search: need {needed} seconds, got {got}")]
    InsufficientOverlap { needed: usize, got: usize },

    #[error("zero variance in {0}")]
    ZeroVariance(String),

    #[error("lag of {lag} s leaves no paired samples")]
    LagLeavesNoPairs { lag: i64 },

    #[error("no averaging window reached the minimum of {min_count} samples")]
    NoWindows { min_count: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid dataset: {0}")]
    InvalidDataset(String),

    #[error("rank-deficient design: column(s) {columns:?} are linearly dependent")]
    RankDeficient { columns: Vec<String> },

    #[error("shape mismatch: model expects {expected} column(s), got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("no admissible breakpoint candidate")]
    NoBreakpoint,

    #[error("SVR solver did not converge in {iterations} iterations (duality gap {gap:.3e})")]
    NotConverged { iterations: usize, gap: f64 },

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("no joinable windows: {0}")]
    NoJoinableWindows(String),

    #[error("unknown {kind} `{value}`")]
    Unknown { kind: &'static str, value: String },

    #[error("unsupported model schema version {0}")]
    SchemaVersion(u32),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
