use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid quantile level {0}")]
    InvalidQuantileLevel(f64),

    #[error("empty interval [{lo}, {hi}]")]
    EmptyInterval { lo: f64, hi: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("split outside region: threshold {threshold} not in ({lo}, {hi}) on feature {feature}")]
    SplitOutsideRegion {
        feature: usize,
        threshold: f64,
        lo: f64,
        hi: f64,
    },

    #[error("split mass mismatch at row {row}: {diff:e}")]
    SplitMassMismatch { row: usize, diff: f64 },

    #[error("stopping rule vacuous: n * min_leaf_fraction = {0} < 1")]
    StoppingRuleVacuous(f64),

    #[error("empty dataset")]
    EmptyDataset,

    /// Configuration rejected before any fitting started (bad mtry, unknown method, ...).
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("unsupported schema version {0}")]
    SchemaVersion(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
