use std::path::PathBuf;

/// Errors produced by the completion toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("mode {mode} out of range for a tensor with {order} modes")]
    ModeOutOfRange { mode: usize, order: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("observation set is empty")]
    EmptyObservations,

    #[error("non-finite value encountered in {context}{}", iteration.map(|t| format!(" at iteration {t}")).unwrap_or_default())]
    NonFinite {
        context: &'static str,
        iteration: Option<usize>,
    },

    #[error("singular value decomposition did not converge ({rows}x{cols} input)")]
    SvdNoConvergence { rows: usize, cols: usize },

    #[error("malformed file: {0}")]
    Format(String),

    #[error("unsupported image: {0}")]
    UnsupportedImage(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{method} at ratio {ratio}, seed {seed}: {source}")]
    Cell {
        method: String,
        ratio: f64,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

/// Coarse classification used to pick process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::InvalidArgument(_) | Error::ModeOutOfRange { .. } => ErrorClass::Usage,
            Error::NonFinite { .. } | Error::SvdNoConvergence { .. } => ErrorClass::Numerical,
            Error::Cell { source, .. } => source.class(),
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
