use std::fmt;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Why a ranked list fails validation. Positions are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Violation {
    Empty,
    Duplicate { position: usize, item: u32 },
    OutOfRange { position: usize, item: u32, num_items: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "empty list"),
            Violation::Duplicate { position, item } => {
                write!(f, "duplicate item {item} at position {position}")
            }
            Violation::OutOfRange {
                position,
                item,
                num_items,
            } => write!(
                f,
                "item {item} at position {position} is out of range (universe size {num_items})"
            ),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{what} index {index} out of range (size {size})")]
    Index {
        what: &'static str,
        index: usize,
        size: usize,
    },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("{}invalid ranked list: {violation}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
    Validation {
        line: Option<usize>,
        violation: Violation,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("model file: {0}")]
    Format(String),
    #[error("training diverged in {phase} at step {step}")]
    Divergence { phase: String, step: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn divergence(phase: impl Into<String>, step: usize) -> Self {
        Error::Divergence {
            phase: phase.into(),
            step,
        }
    }
}
