//! Error types shared across the crate.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A value violates the mathematical domain of an operation
    /// (non-positive depth, NaN sample, zero atmospheric channel, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Two rasters that must share a shape do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A configuration parameter is outside its legal range.
    #[error("config error: {0}")]
    Config(String),

    /// A file exists but its contents are not in the expected format.
    #[error("format error: {0}")]
    Format(String),

    /// A statistical estimate has no usable data.
    #[error("estimation error: {0}")]
    Estimation(String),

    /// File-system failure, with the path that triggered it.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Image decode/encode failure, with the path that triggered it.
    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn image(path: impl Into<PathBuf>, source: image::ImageError) -> Self {
        Error::Image {
            path: path.into(),
            source,
        }
    }
}
