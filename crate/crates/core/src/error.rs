use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Configuration or scenario file is malformed or inconsistent.
    #[error("invalid config: {0}")]
    Config(String),

    /// Scenario geometry violates an invariant (degenerate wall, duplicate id, ...).
    #[error("invalid geometry: {0}")]
    Geometry(String),

    /// A numeric routine failed (non-finite input, corrupted covariance, ...).
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn geometry(msg: impl Into<String>) -> Self {
        Error::Geometry(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io { path: path.as_ref().display().to_string(), source }
    }

    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) | Error::Json(_) | Error::Io { .. } => "config",
            Error::Geometry(_) => "geometry",
            Error::Numeric(_) => "numeric",
        }
    }
}
