use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed image: {0}")]
    Format(String),
    #[error("truncated image payload: expected {expected} bytes, found {found}")]
    Size { expected: usize, found: usize },
    #[error("channel mismatch: {0}")]
    ChannelMismatch(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("ground truth contains zero boxes")]
    ZeroGroundTruth,
    #[error("empty input: {0}")]
    Empty(String),
    #[error("frame {width}x{height} is smaller than the detector window {win_w}x{win_h}")]
    FrameTooSmall {
        width: usize,
        height: usize,
        win_w: usize,
        win_h: usize,
    },
    #[error("external encoder failed: {0}")]
    Encoder(String),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user-supplied configuration or arguments,
    /// as opposed to problems with the data being processed.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidParam(_) | Error::Manifest(_) | Error::Json(_) | Error::Io { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
