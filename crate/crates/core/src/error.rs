use thiserror::Error;

pub type Result<T> = std::result::Result<T, CaksError>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CaksError {
    #[error("empty chunk")]
    EmptyChunk,
    #[error("invalid uniform sample: {0}")]
    InvalidUniformSample(String),
    #[error("non-finite observation at index {index}: {value}")]
    NonFinite { index: usize, value: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("continued fraction did not converge (a={a}, b={b}, x={x})")]
    NoConvergence { a: f64, b: f64, x: f64 },
    #[error("no complete chunk")]
    NoCompleteChunk,
    #[error("calibration mismatch: state has J={state}, calibration has J={calibration}")]
    CalibrationMismatch { state: usize, calibration: usize },
    #[error("no calibration for J={0}")]
    NoCalibration(usize),
    #[error("mismatched configuration: {0}")]
    ConfigMismatch(String),
    #[error("ambiguous chunk boundary: both states hold a partial chunk")]
    AmbiguousChunkBoundary,
    #[error("calibration file: {0}")]
    CalibrationFile(String),
}
