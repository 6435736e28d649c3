use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DiverError {
    #[error("dimension mismatch: expected {expected:?}, got {actual:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        actual: (usize, usize),
    },
    #[error("image is empty")]
    EmptyImage,
    #[error("buffer length {len} does not match {width}x{height}")]
    BufferLength {
        width: usize,
        height: usize,
        len: usize,
    },
    #[error("non-finite sample at index {index}")]
    NonFiniteSample { index: usize },
    #[error("negative depth sample at index {index}")]
    NegativeDepth { index: usize },
    #[error("image {width}x{height} is smaller than the required {min}x{min}")]
    ImageTooSmall {
        width: usize,
        height: usize,
        min: usize,
    },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("gray patch {index} has zero-norm mean color")]
    ZeroNormPatch { index: usize },
    #[error("gray patch {index} lies outside the image")]
    PatchOutOfBounds { index: usize },
    #[error("non-finite loss in {stage} at iteration {iteration}")]
    NonFiniteLoss {
        stage: &'static str,
        iteration: usize,
    },
    #[error("non-finite gradient for parameter {name}")]
    NonFiniteGradient { name: String },
    #[error("parameter vector shape mismatch: {expected} vs {actual}")]
    ParamShape { expected: usize, actual: usize },
    #[error("no depth map found for {0}")]
    MissingDepth(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub type Result<T, E = DiverError> = std::result::Result<T, E>;
