use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A value violated a documented precondition.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Height cannot be recovered from an offset when the view is nadir.
    #[error("height is unobservable at zero off-nadir angle")]
    UnobservableHeight,

    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    /// Diagnostic tied to a specific record (and optionally instance) of a dataset.
    #[error("image {image_id}{}: {message}", instance.map(|i| format!(", instance {i}")).unwrap_or_default())]
    Record {
        image_id: String,
        instance: Option<usize>,
        message: String,
    },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("synthetic placement failed for image {image_index}: {message}")]
    Placement { image_index: usize, message: String },

    #[error("missing loss component `{component}` for level {level}")]
    MissingComponent {
        level: &'static str,
        component: &'static str,
    },

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("malformed mesh file at line {line}: {message}")]
    MeshFormat { line: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
