use std::io;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
///
/// Variants are grouped by how a caller should react: configuration mistakes
/// (bad parameters, malformed tables), data validation failures (the input
/// violates an invariant), I/O, and internal invariant breaches.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter or configuration file is malformed or out of range.
    #[error("configuration error: {0}")]
    Config(String),

    /// Input data violates a documented invariant (bad lexicon line, empty
    /// test set, single-class training data, ...).
    #[error("validation error: {0}")]
    Validation(String),

    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    /// A bug: an invariant the library itself is responsible for was broken.
    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
