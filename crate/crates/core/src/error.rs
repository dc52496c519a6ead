use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the retrieval toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("grid contract violated: {0}")]
    GridContract(String),

    #[error("insufficient scan range: {range_mhz} MHz < {required_mhz} MHz")]
    InsufficientRange { range_mhz: f64, required_mhz: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("noise region overlaps the spectral peak: {0}")]
    RegionOverlap(String),

    #[error("training diverged at iteration {iteration}: {reason}")]
    TrainingDiverged {
        iteration: usize,
        reason: String,
        log: crate::fnn::TrainLog,
    },

    #[error("bad magic in {path:?}: expected {expected}")]
    BadMagic { path: PathBuf, expected: &'static str },

    #[error("unsupported format version {found} in {path:?}")]
    Version { path: PathBuf, found: u32 },

    #[error("truncated file {path:?}")]
    Truncated { path: PathBuf },

    #[error("dimension mismatch in {path:?}: {detail}")]
    Dimension { path: PathBuf, detail: String },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for failures of the numerical machinery rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::TrainingDiverged { .. } | Error::Degenerate(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
