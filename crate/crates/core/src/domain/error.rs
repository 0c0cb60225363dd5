use thiserror::Error;

use super::ids::NodeId;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DomainError {
    #[error("research question is empty")]
    EmptyQuestion,
    #[error("context addition text is empty")]
    EmptyAddition,
    #[error("prior-hypothesis addition must name its source node")]
    MissingSourceNode,
    #[error("unknown parent node {0}")]
    UnknownParent(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("node {0} already exists")]
    DuplicateNode(NodeId),
    #[error("step index {got} invalid, expected {expected}")]
    StepIndexViolation { expected: u32, got: u32 },
    #[error("node {0} has stage-specific fields inconsistent with its stage")]
    StageFieldViolation(NodeId),
    #[error("invalid tree: {0}")]
    InvalidTree(String),
    #[error("invalid score: {0}")]
    InvalidScore(String),
    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),
    #[error("feedback text is empty")]
    EmptyFeedback,
    #[error("route target equals the node's current stage")]
    SameStageRoute,
}
