use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },

    #[error("Cholesky breakdown at pivot {pivot} (value {value:e}); matrix is not positive definite")]
    CholeskyBreakdown { pivot: usize, value: f64 },

    #[error("non-finite value in {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("output weights are all zero; no quantization scale is defined")]
    ZeroBeta,

    #[error("precision ladder exhausted: max |entry| is already {max_abs}")]
    LadderExhausted { max_abs: i64 },

    #[error("input vector is zero{}", if *.after_centering { " after mean removal" } else { "" })]
    ZeroInput { after_centering: bool },

    #[error("input value {value} at index {index} outside declared range [{lo}, {hi}]")]
    OutOfRange { index: usize, value: i64, lo: i64, hi: i64 },

    #[error("accumulator headroom violated: {0}")]
    Headroom(String),

    #[error("row {row} is all zero and cannot be l2-normalized")]
    ZeroRow { row: usize },

    #[error("class {class} has {count} samples; at least 2 are needed to split")]
    ClassTooSmall { class: usize, count: usize },

    #[error("no candidates to select from")]
    EmptyCandidates,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed file at byte offset {offset}: {msg}")]
    Format {
        path: PathBuf,
        offset: u64,
        msg: String,
    },

    #[error("config: {msg}")]
    Config { key: Option<String>, msg: String },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, offset: u64, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            offset,
            msg: msg.into(),
        }
    }

    pub(crate) fn dims(op: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::DimensionMismatch {
            op,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    /// Wraps the error with a short description of what was being done.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping any context layers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Context { source, .. } => source.root(),
            other => other,
        }
    }
}
