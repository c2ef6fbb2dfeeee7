use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("weights must lie on the simplex: {0}")]
    InvalidWeights(String),

    #[error("block has {found} entries, codec block size is {expected}")]
    BlockLength { expected: usize, found: usize },

    #[error("rank {rank} out of range for block size {block_size}")]
    RankOutOfRange { rank: u32, block_size: usize },

    #[error("unsupported block size {0} (must be in 1..={1})")]
    BlockSize(usize, usize),

    #[error("vector length {len} is not divisible by block size {block_size}")]
    NotDivisible { len: usize, block_size: usize },

    #[error("malformed payload: {0}")]
    Payload(String),

    #[error("invalid value for `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("trajectory was produced by `{found}` but `{expected}` checks were requested")]
    SchemeMismatch { expected: String, found: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
