use std::path::PathBuf;

/// Errors produced by the curation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dataset not found: {0}")]
    DatasetNotFound(PathBuf),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed JSON: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: malformed CSV: {message}")]
    Csv { path: PathBuf, message: String },

    #[error("{path}: bad magic {found:?} (expected {expected:?})")]
    BadMagic {
        path: PathBuf,
        found: [u8; 4],
        expected: [u8; 4],
    },

    #[error("{path}: unsupported format version {version}")]
    UnsupportedVersion { path: PathBuf, version: u32 },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: non-finite value at flat index {index}")]
    NonFinite { path: PathBuf, index: usize },

    #[error("missing file {0}")]
    MissingFile(PathBuf),

    #[error("frame {t} out of range 1..={len}")]
    FrameOutOfRange { t: usize, len: usize },

    #[error("sampler shape mismatch: {0}")]
    SamplerShape(String),

    #[error("sampling failed for trajectory {trajectory} at frame {t}: {source}")]
    Sampling {
        trajectory: String,
        t: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("unknown trajectory {0}")]
    UnknownTrajectory(String),

    #[error("no labeling for trajectory {0}")]
    MissingLabeling(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid data: {0}")]
    InvalidData(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(path: impl Into<PathBuf>, source: serde_json::Error) -> Self {
        Error::Json {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True when the failure stems from a bad parameter rather than bad data.
    pub fn is_config_error(&self) -> bool {
        matches!(self, Error::InvalidConfig(_))
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
