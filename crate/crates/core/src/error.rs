use thiserror::Error;

/// Errors surfaced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument fell outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Matrix or frame dimensions do not line up.
    #[error("shape error: {0}")]
    Shape(String),
    /// An index is out of range.
    #[error("index error: {0}")]
    Index(String),
    /// A simulation configuration is internally inconsistent.
    #[error("configuration error: {0}")]
    Config(String),
    /// Quantizer calibration cannot proceed (degenerate spec).
    #[error("calibration error: {0}")]
    Calibration(String),
    /// Channel estimation failed (rank-deficient pilot matrix).
    #[error("estimation error: {0}")]
    Estimation(String),
    /// A detector could not produce a decision.
    #[error("detection error: {0}")]
    Detection(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
