use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("mark index {index} out of range for a measure with {len} atoms")]
    MarkOutOfRange { index: usize, len: usize },

    #[error("{0} is only defined for spatially constant coefficients")]
    SpatiallyVarying(&'static str),

    #[error("jump event at t = {time} lies outside the step window ({start}, {end}]")]
    EventOutsideWindow { time: f64, start: f64, end: f64 },

    #[error("step {step} (t = {time}) produced a non-finite state")]
    StepFailure { step: usize, time: f64 },

    #[error("path {path_index} failed: {source}")]
    PathFailure {
        path_index: u64,
        #[source]
        source: Box<SimError>,
    },

    #[error("noise `{noise}` cannot be integrated with scheme `{scheme}`")]
    IncompatibleScheme {
        noise: &'static str,
        scheme: &'static str,
    },
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> SimError {
    SimError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
