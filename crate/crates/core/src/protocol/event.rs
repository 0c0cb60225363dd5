use std::fmt;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::domain::{EvaluationScore, EventId, HypothesisNode, InspirationId, NodeId, Stage};
use crate::refine::{RefineOutcome, RunLogRecord};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    Init,
    BlueprintSet,
    ExploreRound,
    FeedbackApplied,
    Routed,
    RefineRun,
    SelfRanked,
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// How a routed or ranked node was chosen; informational only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chooser {
    Human,
    SelfRank,
    OracleRank,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub node: NodeId,
    /// `None` when the scorer could not produce a usable score.
    pub scores: Option<EvaluationScore>,
}

impl RankEntry {
    pub fn average(&self) -> Option<f64> {
        self.scores.as_ref().map(EvaluationScore::average)
    }
}

/// Event payloads carry full results so that replay never calls a model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EventPayload {
    Init {
        question: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        survey: Option<String>,
        corpus_ref: String,
        root: HypothesisNode,
    },
    BlueprintSet {
        text: String,
    },
    ExploreRound {
        parent: NodeId,
        selected: Vec<InspirationId>,
        nodes: Vec<HypothesisNode>,
    },
    FeedbackApplied {
        node: NodeId,
        /// Text of the node when the feedback was given.
        prior: String,
        feedback: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        chooser: Option<Chooser>,
    },
    Routed {
        node: NodeId,
        from: Stage,
        target: Stage,
        /// Exploration summary handed to the fine-grained stage.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        summary: Option<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        chooser: Option<Chooser>,
    },
    RefineRun {
        start: NodeId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        start_score: Option<EvaluationScore>,
        nodes: Vec<HypothesisNode>,
        outcome: RefineOutcome,
        log: Vec<RunLogRecord>,
        complete: bool,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        error: Option<String>,
    },
    SelfRanked {
        ranking: Vec<RankEntry>,
    },
}

impl EventPayload {
    pub fn kind(&self) -> EventKind {
        match self {
            EventPayload::Init { .. } => EventKind::Init,
            EventPayload::BlueprintSet { .. } => EventKind::BlueprintSet,
            EventPayload::ExploreRound { .. } => EventKind::ExploreRound,
            EventPayload::FeedbackApplied { .. } => EventKind::FeedbackApplied,
            EventPayload::Routed { .. } => EventKind::Routed,
            EventPayload::RefineRun { .. } => EventKind::RefineRun,
            EventPayload::SelfRanked { .. } => EventKind::SelfRanked,
        }
    }

    /// Nodes this event adds to the tree.
    pub fn new_nodes(&self) -> &[HypothesisNode] {
        match self {
            EventPayload::ExploreRound { nodes, .. } | EventPayload::RefineRun { nodes, .. } => {
                nodes
            }
            _ => &[],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolEvent {
    pub id: EventId,
    pub timestamp: u64,
    pub payload: EventPayload,
    /// Hash chained over the previous event's digest, so dropped, edited or
    /// reordered events are detected on restore.
    #[serde(default)]
    pub digest: String,
}

#[derive(Serialize)]
struct Digested<'a> {
    previous: &'a str,
    id: &'a EventId,
    timestamp: u64,
    payload: &'a EventPayload,
}

impl ProtocolEvent {
    pub fn new(id: EventId, timestamp: u64, payload: EventPayload) -> Self {
        Self {
            id,
            timestamp,
            payload,
            digest: String::new(),
        }
    }

    pub fn kind(&self) -> EventKind {
        self.payload.kind()
    }

    /// Digest this event must carry when it follows `previous`.
    pub fn chain_digest(&self, previous: &str) -> String {
        let body = serde_json::to_vec(&Digested {
            previous,
            id: &self.id,
            timestamp: self.timestamp,
            payload: &self.payload,
        })
        .expect("event serializes");
        hex::encode(Sha256::digest(body))
    }

    pub(crate) fn sealed(mut self, previous: &str) -> Self {
        self.digest = self.chain_digest(previous);
        self
    }
}
