use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed or truncated file.
    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(transparent)]
    Core(#[from] batseg_core::Error),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("manifest subjects without files: {}", .0.join(", "))]
    MissingSubjects(Vec<String>),

    #[error("subject {subject}: {source}")]
    Subject {
        subject: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn for_subject(self, subject: &str) -> Self {
        Error::Subject { subject: subject.to_string(), source: Box::new(self) }
    }

    /// True for configuration errors the CLI reports as usage errors.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Core(batseg_core::Error::Config(_)))
    }
}
