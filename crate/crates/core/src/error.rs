use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid image: {0}")]
    InvalidImage(String),

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("item `{id}`: {reason}")]
    Item { id: String, reason: String },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("shape mismatch for item `{id}`: expected {expected}, got {actual}")]
    ShapeMismatch {
        id: String,
        expected: String,
        actual: String,
    },

    #[error("unknown corruption `{0}`")]
    UnknownCorruption(String),

    #[error("severity {0} out of range 1..=5")]
    Severity(u8),

    #[error("codec error: {0}")]
    Codec(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("external codec `{tool}` failed: {stderr}")]
    Adapter { tool: String, stderr: String },

    #[error("schedule error: {0}")]
    Schedule(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("heatmap cell ({i}, {j}): {source}")]
    Cell {
        i: isize,
        j: isize,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed container: {0}")]
    Container(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Wraps this error with the id of the dataset item that produced it.
    pub fn for_item(self, id: &str) -> Self {
        match self {
            e @ (Error::Item { .. } | Error::ShapeMismatch { .. }) => e,
            other => Error::Item {
                id: id.to_string(),
                reason: other.to_string(),
            },
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
