use thiserror::Error;

/// Structural problems found by [`crate::network::validate`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpecError {
    #[error("network has no head layers")]
    EmptyHead,
    #[error("layer {0} has a zero dimension")]
    ZeroDimension(String),
    #[error("layer {site} keep probability {keep_prob} outside (0, 1]")]
    KeepProbability { site: String, keep_prob: f64 },
    #[error("output layer cannot have dropout (keep probability {0})")]
    OutputDropout(f64),
    #[error("output dimension mismatch: head produces {head}, spec declares {declared}")]
    OutputDimension { head: usize, declared: usize },
    #[error("input slice {0:?} is empty")]
    EmptySlice(String),
    #[error("duplicate input slice name {0:?}")]
    DuplicateSlice(String),
    #[error("overlapping slices {0:?} and {1:?}")]
    OverlappingSlices(String, String),
    #[error("input slices leave a gap at offset {0}")]
    SliceGap(usize),
    #[error("encoder {encoder} references unknown slice {slice:?}")]
    UnknownSlice { encoder: usize, slice: String },
    #[error("encoder {0} has no layers")]
    EmptyEncoder(usize),
    #[error("layer {site} expects input dimension {expected}, receives {actual}")]
    LayerChain {
        site: String,
        expected: usize,
        actual: usize,
    },
    #[error("head dimension mismatch: head expects {expected}, encoders produce {actual}")]
    HeadDimension { expected: usize, actual: usize },
    #[error("shared shape conflict for parameter set {0:?}")]
    SharedShapeConflict(String),
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Spec(#[from] SpecError),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("training diverged at epoch {epoch}, batch {batch}: loss is {loss}")]
    Diverged { epoch: usize, batch: usize, loss: f64 },
    #[error("activation {0} cannot be converted to spiking neurons")]
    UnsupportedActivation(String),
    #[error("empty sample")]
    EmptySample,
    #[error("burn-in of {burn_in} ticks leaves nothing of a {len}-tick trace")]
    BurnIn { burn_in: usize, len: usize },
    #[error("p-value {0} outside [0, 1]")]
    PValueRange(f64),
    #[error("{path}: row {row}, column {column:?}: {detail}")]
    Table {
        path: String,
        row: usize,
        column: String,
        detail: String,
    },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
