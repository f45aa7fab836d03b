// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure category, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Caller supplied arguments that violate a precondition.
    Invalid,
    /// Reading, writing or parsing a file failed.
    Io,
    /// A numerical routine failed or the data cannot support the request.
    Numerical,
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("SVD did not converge for a {rows}x{cols} matrix")]
    SvdNoConvergence { rows: usize, cols: usize },

    #[error("requested {requested} principal components but the data has rank {rank}")]
    RankTooLow { requested: usize, rank: usize },

    #[error("need at least {required} positive pairs, found {found}")]
    TooFewPositives { required: usize, found: usize },

    #[error("zero vector at pair {index}")]
    ZeroVector { index: usize },

    #[error("scores need both classes (positives: {positives}, negatives: {negatives})")]
    SingleClass { positives: usize, negatives: usize },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: record {record}: {message}")]
    Record {
        path: PathBuf,
        record: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Shape { .. } | Error::InvalidArgument(_) | Error::SingleClass { .. } => {
                ErrorKind::Invalid
            }
            Error::Format { .. } | Error::Record { .. } | Error::Io { .. } => ErrorKind::Io,
            Error::NonFinite { .. }
            | Error::SvdNoConvergence { .. }
            | Error::RankTooLow { .. }
            | Error::TooFewPositives { .. }
            | Error::ZeroVector { .. } => ErrorKind::Numerical,
        }
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }
}
