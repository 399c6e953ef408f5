use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A row could not be parsed. `line` is 1-based.
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("dosage {value} out of [0, 2] for SNP {snp}")]
    DosageOutOfRange { snp: String, value: f64 },

    #[error("duplicate position {pos} on chromosome {chrom}")]
    DuplicatePosition { chrom: String, pos: u64 },

    #[error("positions not strictly increasing on chromosome {chrom} at {pos}")]
    NonMonotonePositions { chrom: String, pos: u64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error("{0}")]
    Numerical(String),

    /// Failure while screening one window.
    #[error("window {window}: {source}")]
    Window {
        window: String,
        #[source]
        source: Box<Error>,
    },

    #[error("too few exceedances for a tail fit: {found} < {required}")]
    TooFewExceedances { found: usize, required: usize },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
