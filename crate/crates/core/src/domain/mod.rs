//! Shared domain types: contexts, corpora, nodes, scores and the search tree.
//!
//! Nothing in here performs I/O or talks to a model.

mod context;
mod corpus;
mod error;
mod ids;
mod node;
mod signal;
mod tree;

pub use context::{AdditionKind, ContextAddition, ResearchContext};
pub use corpus::{CorpusError, Inspiration, InspirationCorpus};
pub use error::DomainError;
pub use ids::{
    parse_id, Clock, EventId, IdGen, InspirationId, LogicalClock, NodeId, NodeMint, SessionId,
    SystemClock,
};
pub use node::{
    child_step_index, Cursor, EvaluationScore, HypothesisNode, Stage, DEFAULT_CRITERIA, MAX_SCORE,
    MIN_SCORE,
};
pub use signal::GuidingSignal;
pub use tree::{SearchTree, TreeExport};
