//! Error type shared across the crate.

use std::path::PathBuf;

/// Errors produced by solvers, networks, environments and file formats.
#[derive(Debug, thiserror::Error)]
pub enum SoftqError {
    /// Precondition violation: bad shapes, non-finite inputs, invalid ranges.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Malformed or rejected configuration.
    #[error("config error: {0}")]
    Config(String),

    /// Malformed checkpoint, MDP file, or metrics file.
    #[error("parse error: {0}")]
    Parse(String),

    /// Training hit a non-finite parameter; diagnostics were dumped before aborting.
    #[error("numeric abort at step {step}: diagnostic dump written to {dump:?}")]
    NumericAbort { step: u64, dump: PathBuf },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SoftqError>;

impl SoftqError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        SoftqError::InvalidInput(msg.into())
    }
}
