//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by configuration, numerics, environments and I/O.
#[derive(Error, Debug)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("non-finite value in {0}; aborting run")]
    NonFinite(&'static str),

    #[error("cannot sample from an empty replay buffer")]
    EmptyBuffer,

    #[error("environment must be reset before stepping")]
    NeedsReset,

    #[error("unknown environment id: {0}")]
    UnknownEnv(String),

    #[error("snapshot format error: {0}")]
    Snapshot(String),

    #[error("linear system is singular ({0})")]
    Singular(&'static str),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
