use thiserror::Error;

/// Errors raised by model construction and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("torus side {side} is not a multiple of the box width {width}")]
    PartitionMismatch { side: usize, width: usize },

    #[error("box half-width is zero (epsilon0 * range = {0} < 1)")]
    DegenerateBoxes(f64),

    #[error("transition {from} -> {to} is undefined (target equals current state)")]
    UndefinedTransition { from: u8, to: u8 },

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("initial configurations are not ordered: {0}")]
    NotOrdered(String),

    #[error("horizon {available} does not cover the requested window ending at {needed}")]
    HorizonTooShort { available: f64, needed: f64 },

    #[error("coexistence condition fails: b = {0} <= 0")]
    NoCoexistence(f64),

    #[error("bracket [{low}, {high}] does not straddle the transition")]
    BracketNotStraddling { low: f64, high: f64 },

    #[error("integration left the simplex at t = {time}: {detail}")]
    SimplexViolation { time: f64, detail: String },

    #[error("malformed event log line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
