use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Shapes, dimensions or hyperparameters that cannot work together.
    #[error("configuration error: {0}")]
    Config(String),

    /// Caller-supplied data violates an operation's precondition.
    #[error("input error: {0}")]
    Input(String),

    /// A NaN or infinity appeared during a forward or backward pass.
    #[error("numeric error at layer {layer}: {detail}")]
    Numeric { layer: usize, detail: String },

    /// Training aborted because a step failed.
    #[error("training step {step} failed: {source}")]
    Step {
        step: usize,
        #[source]
        source: Box<Error>,
    },

    /// Malformed file contents; `location` names the line or byte offset.
    #[error("parse error at {location}: {detail}")]
    Parse { location: String, detail: String },

    /// An internal invariant was broken.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn parse_line(line: usize, detail: impl Into<String>) -> Self {
        Error::Parse { location: format!("line {line}"), detail: detail.into() }
    }

    pub(crate) fn parse_byte(offset: usize, detail: impl Into<String>) -> Self {
        Error::Parse { location: format!("byte {offset}"), detail: detail.into() }
    }
}
