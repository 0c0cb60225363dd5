use serde::{Deserialize, Serialize};

use super::error::DomainError;
use super::ids::NodeId;
use super::node::Stage;

/// The three ways a navigator steers a session.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "signal", rename_all = "snake_case")]
pub enum GuidingSignal {
    /// Root constraints injected before the search starts.
    InitialBlueprint { text: String },
    /// Move a node across the explore/exploit boundary.
    RouteTransition { node: NodeId, target: Stage },
    /// Critique appended to the context of a node's subtree.
    DirectionalFeedback { node: NodeId, text: String },
}

impl GuidingSignal {
    /// Checks the signal against the effective stage of its node.
    pub fn validate(&self, current_stage: Option<Stage>) -> Result<(), DomainError> {
        match self {
            GuidingSignal::InitialBlueprint { .. } => Ok(()),
            GuidingSignal::RouteTransition { node, target } => match current_stage {
                None => Err(DomainError::UnknownNode(node.clone())),
                Some(stage) if stage == *target => Err(DomainError::SameStageRoute),
                Some(_) => Ok(()),
            },
            GuidingSignal::DirectionalFeedback { node, text } => {
                if current_stage.is_none() {
                    Err(DomainError::UnknownNode(node.clone()))
                } else if text.trim().is_empty() {
                    Err(DomainError::EmptyFeedback)
                } else {
                    Ok(())
                }
            }
        }
    }
}
