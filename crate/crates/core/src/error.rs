use thiserror::Error;

/// Errors raised by the library. Guard violations (inputs outside the
/// supported range) are distinguished from malformed input so the CLI can
/// map them onto exit codes.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid dimension {0}: expected 1 <= d <= 63")]
    InvalidDimension(u32),
    #[error("invalid probability {0}: expected a rational in [0, 1]")]
    InvalidProbability(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("size guard: {0}")]
    Guard(String),
    #[error("vertex {0:#x} is not present")]
    MissingVertex(u64),
    #[error("duplicate point {0:#x}")]
    DuplicatePoint(u64),
    #[error("malformed input: {0}")]
    Parse(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl LabError {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Self::InvalidParameter(msg.into())
    }

    pub(crate) fn guard(msg: impl Into<String>) -> Self {
        Self::Guard(msg.into())
    }

    pub(crate) fn parse(msg: impl Into<String>) -> Self {
        Self::Parse(msg.into())
    }
}

pub type Result<T, E = LabError> = std::result::Result<T, E>;
