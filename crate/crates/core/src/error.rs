use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("empty file")]
    EmptyInput,

    #[error("invalid argument `{field}`: {reason}")]
    InvalidArgument { field: &'static str, reason: String },

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("RBF parameters absent (layer was built with alpha = 1)")]
    RbfParametersAbsent,

    #[error("unknown activation `{0}` (expected tanh, relu, softlim, hardlim or multiquadric)")]
    UnknownActivation(String),

    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),

    #[error("class `{0}` has no usable samples")]
    EmptyClass(String),

    #[error("class `{class}` has {count} samples; at least {required} are needed")]
    TooFewSamples {
        class: String,
        count: usize,
        required: usize,
    },

    #[error("corpus root {0} does not exist or is not a directory")]
    MissingRoot(PathBuf),

    #[error("bad model file: {0}")]
    Format(String),

    #[error("model file truncated while reading {0}")]
    Truncated(&'static str),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            field,
            reason: reason.into(),
        }
    }
}
