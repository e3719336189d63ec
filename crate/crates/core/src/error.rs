use thiserror::Error;

use crate::extraction::{ExtractionTrace, SzlenkSchedule};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A hypothesis of a verification routine does not hold on the supplied data.
    #[error("precondition violated ({hypothesis}): {detail}")]
    PreconditionViolation { hypothesis: String, detail: String },

    #[error("value at node {node} lies outside the convex set: {detail}")]
    DomainViolation { node: usize, detail: String },

    /// The candidate pool ran out before the requested number of selections.
    #[error("extraction stalled after {} selections: {reason}", .trace.len())]
    ExtractionStalled {
        trace: Box<ExtractionTrace>,
        reason: String,
    },

    /// A Szlenk level could not reach its target bound within its parent sequence.
    #[error("level {level} stalled: {reason}")]
    LevelStalled {
        level: usize,
        completed: Box<SzlenkSchedule>,
        reason: String,
    },

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn precondition(hypothesis: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::PreconditionViolation {
            hypothesis: hypothesis.into(),
            detail: detail.into(),
        }
    }
}
