use std::fmt;
use std::path::PathBuf;

/// Failures of the harness and its file formats.
#[derive(Debug)]
pub enum Error {
    /// Numerical or configuration failure inside the engine.
    Core(hyperlora_core::Error),
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// A file was read but its contents are unusable.
    Format { path: PathBuf, detail: String },
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn format(path: impl Into<PathBuf>, detail: impl fmt::Display) -> Self {
        Error::Format {
            path: path.into(),
            detail: detail.to_string(),
        }
    }

    /// Process exit code for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Core(e) if e.is_numerical() => 3,
            Error::Core(_) | Error::Config(_) => 2,
            Error::Io { .. } | Error::Format { .. } => 4,
        }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Core(e) => write!(f, "{e}"),
            Error::Io { path, source } => write!(f, "{}: {source}", path.display()),
            Error::Format { path, detail } => write!(f, "{}: {detail}", path.display()),
            Error::Config(msg) => write!(f, "invalid configuration: {msg}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Core(e) => Some(e),
            Error::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl From<hyperlora_core::Error> for Error {
    fn from(e: hyperlora_core::Error) -> Self {
        Error::Core(e)
    }
}
