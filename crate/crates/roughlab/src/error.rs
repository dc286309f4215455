use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("invalid window [{start}, {end}] on a grid of {len} points")]
    InvalidWindow { start: usize, end: usize, len: usize },

    #[error("invalid time change: {0}")]
    InvalidTimeChange(String),

    #[error("intensity {value} exceeds bound {bound} at t = {time}")]
    IntensityBoundViolation { time: f64, value: f64, bound: f64 },

    #[error("non-finite state at t = {time}")]
    Divergence { time: f64 },

    #[error("grid contract violated: event at t = {time} is not a grid point")]
    GridContract { time: f64 },

    #[error("degenerate normalization at t = {time}: log g1 = {log_g1} (I mean {i_mean}, min {i_min}, max {i_max})")]
    DegenerateNormalization {
        time: f64,
        log_g1: f64,
        i_mean: f64,
        i_min: f64,
        i_max: f64,
    },

    #[error("unsupported mode: {0}")]
    UnsupportedMode(String),

    #[error("hypothesis not met: {0}")]
    HypothesisNotMet(String),

    #[error("serialization: {0}")]
    Serialization(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
