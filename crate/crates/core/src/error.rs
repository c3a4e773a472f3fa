use alloc::string::String;

/// Errors raised anywhere in the numeric core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {detail}")]
    DimensionMismatch { op: &'static str, detail: String },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("matrix must be symmetric")]
    NotSymmetric,

    #[error("index {index} out of range for bound {bound}")]
    IndexOutOfRange { index: usize, bound: usize },

    #[error("non-finite value at position {position}")]
    NonFinite { position: usize },

    #[error("row {row} has non-positive degree {degree}")]
    DegenerateDegree { row: usize, degree: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("invalid evaluation: {0}")]
    InvalidEvaluation(String),

    #[error("loss must be a 1x1 scalar, got {rows}x{cols}")]
    NonScalarLoss { rows: usize, cols: usize },

    #[error("non-finite gradient for parameter `{name}`")]
    NonFiniteGradient { name: String },

    #[error("training aborted at epoch {epoch}: non-finite {term} loss (parameter norms: {norms})")]
    NonFiniteLoss {
        epoch: usize,
        term: &'static str,
        norms: String,
    },

    #[error("training aborted at epoch {epoch}: non-finite gradient for `{parameter}` (parameter norms: {norms})")]
    NonFiniteUpdate {
        epoch: usize,
        parameter: String,
        norms: String,
    },

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
