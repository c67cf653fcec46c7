use thiserror::Error;

use crate::model::EcosystemId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("coordinate error: {0}")]
    Coordinate(String),

    #[error("cannot parse {ecosystem} version {input:?}: {reason}")]
    VersionParse {
        ecosystem: EcosystemId,
        input: String,
        reason: String,
    },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("transport error: {0}")]
    Transport(String),

    #[error("no recorded fixture for {method} {url} (key {key})")]
    FixtureMiss {
        key: String,
        method: String,
        url: String,
    },

    #[error("not found: {0}")]
    NotFound(String),

    #[error("decode error: {0}")]
    Decode(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("{tool} execution failed: {message}")]
    Execution { tool: String, message: String },

    #[error("controlled run aborted after {attempts} attempt(s): {reason}")]
    Aborted { attempts: usize, reason: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable machine-readable kind, used in CLI error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Coordinate(_) => "coordinate",
            Error::VersionParse { .. } => "version_parse",
            Error::Usage(_) => "usage",
            Error::Transport(_) => "transport",
            Error::FixtureMiss { .. } => "fixture_miss",
            Error::NotFound(_) => "not_found",
            Error::Decode(_) => "decode",
            Error::Data(_) => "data",
            Error::Execution { .. } => "execution",
            Error::Aborted { .. } => "aborted",
            Error::Config(_) => "config",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}
