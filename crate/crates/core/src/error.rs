use thiserror::Error;

#[derive(Debug, Error)]
pub enum PeelError {
    /// A configuration field failed validation. `field` names the offending key.
    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("solver diverged at particle {particle}: {detail}")]
    Divergence { particle: usize, detail: String },

    #[error("controller failure: {0}")]
    Controller(String),

    #[error("metrics error: {0}")]
    Metrics(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error in {path}: {reason}")]
    Parse { path: String, reason: String },
}

impl PeelError {
    pub fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        PeelError::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        PeelError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, PeelError>;
