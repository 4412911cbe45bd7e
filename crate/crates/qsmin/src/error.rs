//! Error types shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The gap/ratio bookkeeping identity `sum(e) + n*c = 1` fails at some level.
    #[error("inconsistent parameters at level {level}: sum(e) + n*c - 1 = {residual}")]
    Consistency { level: usize, residual: String },

    #[error("value out of range: {0}")]
    Range(String),

    #[error("level {requested} exceeds the parameter domain (defined up to {available})")]
    Depth { requested: usize, available: usize },

    #[error("level would contain {count} intervals, exceeding the cap of {cap}")]
    Capacity { count: String, cap: u64 },

    #[error("argument outside the map domain: {0}")]
    Domain(String),

    #[error("insufficient working precision: {0}")]
    Precision(String),

    #[error("invalid interval geometry: {0}")]
    Geometry(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("invalid chain address: {0}")]
    Chain(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the CLI: 2 for configuration or consistency
    /// problems, 3 for degenerate mathematics, 4 for precision failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Consistency { .. }
            | Error::Range(_)
            | Error::Parse(_)
            | Error::Config(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => 2,
            Error::Depth { .. }
            | Error::Capacity { .. }
            | Error::Domain(_)
            | Error::Geometry(_)
            | Error::Degenerate(_)
            | Error::Chain(_) => 3,
            Error::Precision(_) => 4,
        }
    }
}
