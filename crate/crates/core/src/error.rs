use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    /// Row and column are 1-based data coordinates (the header is not counted).
    #[error("row {row}, column {column}: {message}")]
    BadCell {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("unknown asset label `{0}`")]
    UnknownLabel(String),

    #[error("duplicate asset label `{0}`")]
    DuplicateLabel(String),

    #[error("enumeration of {count} index tuples exceeds the limit of {limit}")]
    EnumerationBound { count: u128, limit: u128 },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
