use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("grid dimensions must be at least 1x1, got {width}x{height}")]
    InvalidDims { width: usize, height: usize },
    #[error("mask has no pixels")]
    EmptyMask,
    #[error("pixel ({x}, {y}) lies outside a {width}x{height} grid")]
    OutOfBounds {
        x: i64,
        y: i64,
        width: usize,
        height: usize,
    },
    #[error("grid dimensions differ: {0}")]
    DimsMismatch(String),
    #[error("instance has no valid flow samples")]
    NoSamples,
    #[error("frame order violation: expected frame {expected}, got {got}")]
    FrameOrderViolation { expected: u32, got: u32 },
    #[error("ground truth is empty")]
    EmptyGroundTruth,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error("bad .flo magic number {0}")]
    BadMagic(f32),
    #[error("truncated file: {0}")]
    TruncatedFile(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid scene spec: {0}")]
    Spec(String),
    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Image(#[from] image::ImageError),
}

impl Error {
    /// Attach the offending path to an error raised while handling a file.
    pub fn at(self, path: impl Into<PathBuf>) -> Error {
        match self {
            e @ Error::File { .. } => e,
            e => Error::File {
                path: path.into(),
                source: Box::new(e),
            },
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
