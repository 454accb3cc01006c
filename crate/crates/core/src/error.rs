use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid intensity: {0}")]
    InvalidIntensity(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("density value {value} exceeds declared sup {sup} at {point:?}")]
    DensityExceedsSup { value: f64, sup: f64, point: Vec<f64> },

    #[error("negative density value {value} at {point:?}")]
    NegativeDensity { value: f64, point: Vec<f64> },

    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),

    #[error("{what} must be positive")]
    ZeroCount { what: &'static str },

    #[error("{what} = {value} is out of range {lo}..={hi}")]
    OutOfRange {
        what: &'static str,
        value: usize,
        lo: usize,
        hi: usize,
    },

    #[error("malformed partition: {0}")]
    MalformedPartition(String),

    #[error("variance must be positive, got {0}")]
    NonPositiveVariance(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("unreliable estimate: {0}")]
    Unreliable(String),

    #[error("empty sample")]
    EmptySample,
}
