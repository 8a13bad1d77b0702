use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("expected {expected} actions (one per active agent), got {got}")]
    ActionCount { expected: usize, got: usize },

    #[error("scenario generation failed: {0}")]
    Scenario(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch in {context}: expected {expected:?}, got {actual:?}")]
    Shape {
        context: &'static str,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("non-finite value during {context}: {detail}")]
    NonFinite { context: &'static str, detail: String },

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("architecture mismatch: checkpoint has {found}, expected {expected}")]
    Architecture { expected: String, found: String },

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("episode tick {tick}: {source}")]
    Episode {
        tick: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] io::Error),
}
