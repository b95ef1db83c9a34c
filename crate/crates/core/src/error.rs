use std::path::PathBuf;

/// Errors produced across the retrieval engine.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("row {0} has zero L2 norm")]
    ZeroNormRow(usize),
    #[error("non-finite entry at flat index {0}")]
    NonFiniteEntry(usize),
    #[error("buffer length {len} does not match shape {rows}x{dim}")]
    ShapeMismatch { rows: usize, dim: usize, len: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimMismatch { expected: usize, found: usize },
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("grid {rows}x{cols} is too fine for a {height}x{width} image")]
    GridTooFine {
        rows: usize,
        cols: usize,
        height: usize,
        width: usize,
    },
    #[error("invalid granularity spec: {0}")]
    InvalidGranularity(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("expected {expected} levels, found {found}")]
    LevelCountMismatch { expected: usize, found: usize },
    #[error("level {level} out of range 1..={levels}")]
    LevelOutOfRange { level: usize, levels: usize },
    #[error("token index {index} out of range (total {total})")]
    IndexOutOfRange { index: usize, total: usize },
    #[error("document has no tokens")]
    EmptyDocument,
    #[error("query has no tokens")]
    EmptyQuery,
    #[error("EmptyCorpus: nothing to search")]
    EmptyCorpus,
    #[error("contribution total {total} is not positive; unnormalized sums {sums:?}")]
    DegenerateNormalization { total: f64, sums: Vec<f64> },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("malformed run: {0}")]
    MalformedRun(String),
    #[error("malformed qrels: {0}")]
    MalformedQrels(String),
    #[error("oracle table is missing query {query} for system {system}")]
    MissingCell { query: String, system: String },
    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },
    #[error("checksum mismatch in {path}: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch {
        path: PathBuf,
        stored: u32,
        computed: u32,
    },
    #[error("inconsistent dimension for page {page}: expected {expected}, found {found}")]
    InconsistentDim {
        page: String,
        expected: usize,
        found: usize,
    },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}
