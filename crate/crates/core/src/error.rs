use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("cannot encode {path}: {message}")]
    Encode { path: PathBuf, message: String },

    #[error("unsupported png variant in {path}: {variant}")]
    UnsupportedPng { path: PathBuf, variant: String },

    #[error("zero-dimension raster ({width}x{height})")]
    ZeroDimension { width: usize, height: usize },

    #[error("invalid raster: {0}")]
    InvalidRaster(String),

    #[error("dimension mismatch: {what} is {got_w}x{got_h}, expected {want_w}x{want_h}")]
    DimensionMismatch {
        what: String,
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },

    #[error("parameter out of range: {0}")]
    Param(String),

    #[error("invalid plan: {0}")]
    Plan(String),

    #[error("sample {id}: {source}")]
    Sample {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("output collision: stem {0} generated twice")]
    Collision(String),

    #[error("empty field of view")]
    EmptyFov,

    #[error("degenerate ground truth: field of view holds only {0} pixels")]
    DegenerateTruth(&'static str),

    #[error("no matching stems between {0} and {1}")]
    NoMatchingStems(PathBuf, PathBuf),

    #[error("manifest: {0}")]
    Manifest(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    /// Wrap with the id of the sample being processed.
    pub fn in_sample(self, id: &str) -> Self {
        match self {
            e @ Error::Sample { .. } => e,
            e => Error::Sample {
                id: id.to_string(),
                source: Box::new(e),
            },
        }
    }
}
