use std::path::PathBuf;

/// Errors produced while parsing, evaluating or analysing rankings.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("label {label} outside grade scale 0..={g_max}")]
    LabelOutOfScale { label: u32, g_max: u32 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("ranking for query {qid} is not a permutation of 0..{n}")]
    InvalidRanking { qid: String, n: usize },

    #[error("runs are missing queries: {}", .0.join(", "))]
    MissingQueries(Vec<String>),

    #[error("query {qid}: unknown document id {doc_id}")]
    UnknownDocument { qid: String, doc_id: String },

    #[error("query {qid}: document id {doc_id} is not unique")]
    AmbiguousDocument { qid: String, doc_id: String },

    #[error("{prefixes} distinct prefixes exceed the enumeration limit of {limit}; use Monte Carlo instead")]
    Intractable { prefixes: u64, limit: u64 },

    #[error("normalization input out of range: {0}")]
    BoundViolation(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    /// Attaches the originating file to an error.
    pub fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
