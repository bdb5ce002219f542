use thiserror::Error;

/// Errors raised by the segmentation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("channel mismatch: expected {expected}, found {found}")]
    ChannelMismatch { expected: usize, found: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("phase index {index} out of range for {count} phase fields")]
    PhaseIndexOutOfRange { index: usize, count: usize },

    #[error("expected {expected} region means, found {found}")]
    RegionCountMismatch { expected: usize, found: usize },

    #[error("no edge pixels above threshold sigma = {sigma}; try a smaller sigma")]
    NoEdges { sigma: f64 },

    #[error("cannot split {points} points into {clusters} clusters")]
    TooFewPoints { points: usize, clusters: usize },

    #[error("non-finite value in phase field {field} at step {step}")]
    NonFinite { field: usize, step: usize },

    #[error("spectral plan does not match the solver parameters: {0}")]
    PlanMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
