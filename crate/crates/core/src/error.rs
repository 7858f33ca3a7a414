use std::path::PathBuf;

/// Errors raised by the solvers, generators and harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("exhaustive search over {p} features refused (limit {max_p})")]
    TooManyFeatures { p: usize, max_p: usize },

    #[error("normalization undefined: {0}")]
    UndefinedNormalization(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: row {row}: {message}")]
    Csv {
        path: PathBuf,
        /// 1-based line in the file, header included; 0 when not tied to a line.
        row: usize,
        message: String,
    },

    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by caller-supplied input rather than an
    /// internal failure.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Serialize(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidArgument(msg()))
    }
}
