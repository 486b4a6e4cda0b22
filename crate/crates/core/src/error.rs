use std::fmt;

use crate::rational::Rational;

/// Result alias used across the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Malformed input text. `line` is 1-based.
    #[error("syntax error at line {line}: {message}")]
    Syntax { line: usize, message: String },

    /// Well-formed input that violates a model or data invariant.
    #[error("validation error: {0}")]
    Validation(String),

    /// Sizes or dimensions of two objects do not agree.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("state space of {size} configurations exceeds the enumeration cap {cap}")]
    CapExceeded { size: String, cap: u64 },

    #[error("partition is not lumpable: {0}")]
    NotLumpable(Box<LumpWitness>),

    #[error("no absorbing state is reachable from state {state}")]
    NoAbsorbingReachable { state: usize },

    #[error("linear solve failed: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn syntax(line: usize, message: impl Into<String>) -> Self {
        Error::Syntax {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn validation(message: impl Into<String>) -> Self {
        Error::Validation(message.into())
    }

    pub(crate) fn dimension(message: impl Into<String>) -> Self {
        Error::Dimension(message.into())
    }
}

/// Counterexample to strong lumpability: two states of the same block whose
/// probability mass into `target_block` differs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LumpWitness {
    pub source_block: usize,
    pub target_block: usize,
    pub state: usize,
    pub other_state: usize,
    pub state_sum: Rational,
    pub other_sum: Rational,
}

impl fmt::Display for LumpWitness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "block {} -> block {}: state {} sends {} but state {} sends {}",
            self.source_block, self.target_block, self.state, self.state_sum, self.other_state, self.other_sum
        )
    }
}
