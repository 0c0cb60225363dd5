//! Session state machine for the three guiding signals.
//!
//! Every change to a session is an event. Live operations build an event
//! from engine output and hand it to the same `apply` used by replay, so a
//! session is always reconstructible from its log.

mod event;
mod session;
mod trace;

use thiserror::Error;

pub use event::{Chooser, EventKind, EventPayload, ProtocolEvent, RankEntry};
pub use session::{sort_ranking, BaseInputs, Session, SessionExport, SessionState};
pub use trace::{validate_trace, TraceViolation};

use crate::domain::{CorpusError, DomainError, NodeId, Stage};
use crate::explore::ExploreError;
use crate::refine::RefineError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Domain(#[from] DomainError),
    #[error("corpus invalid: {0}")]
    CorpusInvalid(#[from] CorpusError),
    #[error("node {node} is treated as {actual}, expected {expected}")]
    StageMismatch {
        node: NodeId,
        expected: Stage,
        actual: Stage,
    },
    #[error("no candidates to rank")]
    EmptyCandidates,
    #[error("protocol violation at {0}")]
    Trace(#[from] TraceViolation),
    #[error(transparent)]
    Explore(#[from] ExploreError),
    #[error("refinement incomplete: {0}")]
    RefineIncomplete(RefineError),
    #[error("scoring failed: {0}")]
    Scoring(RefineError),
    #[error("corrupt session: {0}")]
    CorruptSession(String),
}

impl ProtocolError {
    /// True when the error names a node that does not exist.
    pub fn is_unknown_node(&self) -> bool {
        matches!(
            self,
            ProtocolError::Domain(DomainError::UnknownNode(_) | DomainError::UnknownParent(_))
        )
    }
}
