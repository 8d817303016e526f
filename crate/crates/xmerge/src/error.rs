use thiserror::Error;

/// Errors raised by the merging library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("alignment error: {0}")]
    Alignment(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("spline fit failed: {0}")]
    Fit(String),

    #[error("estimation failed: {0}")]
    Estimation(String),

    #[error("split failed: {0}")]
    Split(String),

    #[error("{file}:{line}: {message}")]
    Parse {
        file: String,
        line: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Broad class of the failure, used by the command line front end to
    /// choose an exit code.
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Parse { .. } | Error::Io { .. } | Error::Alignment(_) | Error::Split(_) => {
                ErrorKind::Input
            }
            Error::Shape(_) | Error::Parameter(_) => ErrorKind::Usage,
            Error::Fit(_) | Error::Estimation(_) => ErrorKind::Numerical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Input,
    Numerical,
}

pub type Result<T> = std::result::Result<T, Error>;
