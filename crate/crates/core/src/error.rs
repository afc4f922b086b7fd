use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument or configuration value violates its documented bounds.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    /// A sidecar or config file is missing a field or cannot be parsed.
    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    /// Payload size disagrees with the declared shape.
    #[error("integrity error in {path}: expected {expected} bytes, found {found}")]
    Integrity {
        path: PathBuf,
        expected: usize,
        found: usize,
    },

    #[error("unknown label {0}")]
    UnknownLabel(u16),

    /// Two phantom structures claim the same voxel.
    #[error("phantom structures overlap: '{first}' and '{second}'")]
    Overlap { first: String, second: String },

    /// A pipeline stage could not find the artifact produced by an earlier stage.
    #[error("missing upstream artifact {0} (run the earlier pipeline stage first)")]
    MissingArtifact(PathBuf),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("correlation undefined: {0}")]
    UndefinedCorrelation(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.into(),
        }
    }

    /// Short category tag used in CLI diagnostics.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Parameter(_) => "parameter",
            Error::Format { .. } => "format",
            Error::Integrity { .. } => "integrity",
            Error::UnknownLabel(_) => "lookup",
            Error::Overlap { .. } => "spec",
            Error::MissingArtifact(_) => "pipeline",
            Error::Evaluation(_) => "evaluation",
            Error::UndefinedCorrelation(_) => "statistics",
            Error::Io { .. } => "io",
            Error::Csv(_) => "format",
        }
    }

    /// Process exit code for this error category. Zero is reserved for success.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parameter(_) => 2,
            Error::Format { .. } | Error::Csv(_) => 3,
            Error::Integrity { .. } => 4,
            Error::UnknownLabel(_) => 5,
            Error::Overlap { .. } => 6,
            Error::MissingArtifact(_) => 7,
            Error::Evaluation(_) => 8,
            Error::UndefinedCorrelation(_) => 9,
            Error::Io { .. } => 10,
        }
    }
}
