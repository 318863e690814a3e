use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse { path: PathBuf, line: usize, message: String },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("invalid dataset: {0}")]
    Data(String),

    #[error(transparent)]
    Core(#[from] pshgcn_core::Error),

    #[error("check failed: {0}")]
    Check(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code: 1 usage, 2 data, 3 numeric or assertion failure.
    pub fn exit_code(&self) -> u8 {
        use pshgcn_core::Error as C;
        match self {
            Error::Usage(_) => 1,
            Error::Io { .. } | Error::Parse { .. } | Error::Json { .. } | Error::Format { .. } | Error::Data(_) => 2,
            Error::Check(_) => 3,
            Error::Core(e) => match e {
                C::NonFinite(_) | C::NoConvergence { .. } | C::Singular(_) | C::Diverged { .. } => 3,
                _ => 2,
            },
        }
    }
}
