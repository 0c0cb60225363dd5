//! The protocol grammar: `Init BlueprintSet? Block*`, where every block is
//! legal for the stage the active node is treated as.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::event::{EventPayload, ProtocolEvent};
use crate::domain::{EventId, NodeId, Stage};

#[derive(Clone, Debug, PartialEq, Eq, Error, Serialize, Deserialize)]
#[error("event {index}: {rule}")]
pub struct TraceViolation {
    pub index: usize,
    pub rule: String,
}

/// Tracks the active node and its effective stage while consuming events.
#[derive(Clone, Debug, Default)]
pub(crate) struct TraceMachine {
    consumed: usize,
    last_id: Option<EventId>,
    active: Option<NodeId>,
    stage: Option<Stage>,
    stages: HashMap<NodeId, Stage>,
}

impl TraceMachine {
    pub(crate) fn active(&self) -> Option<&NodeId> {
        self.active.as_ref()
    }

    pub(crate) fn stage(&self) -> Option<Stage> {
        self.stage
    }

    /// Stage `node` would be treated as by the next engine call.
    pub(crate) fn effective_stage(&self, node: &NodeId) -> Option<Stage> {
        if self.active.as_ref() == Some(node) {
            self.stage
        } else {
            self.stages.get(node).copied()
        }
    }

    fn activate(&mut self, node: &NodeId) {
        if self.active.as_ref() != Some(node) {
            self.stage = self.stages.get(node).copied();
            self.active = Some(node.clone());
        }
    }

    pub(crate) fn step(&mut self, event: &ProtocolEvent) -> Result<(), TraceViolation> {
        let index = self.consumed;
        let fail = |rule: String| Err(TraceViolation { index, rule });
        if let Some(last) = &self.last_id {
            if event.id <= *last {
                return fail(format!("event id {} does not increase", event.id));
            }
        }
        match (&event.payload, index) {
            (EventPayload::Init { root, .. }, 0) => {
                if !root.is_root() || root.stage != Stage::Exploratory {
                    return fail("root must be an exploratory node without parent".into());
                }
                self.stages.insert(root.id.clone(), root.stage);
                self.active = Some(root.id.clone());
                self.stage = Some(Stage::Exploratory);
            }
            (EventPayload::Init { .. }, _) => return fail("Init may only appear first".into()),
            (_, 0) => return fail("first event must be Init".into()),
            (EventPayload::BlueprintSet { .. }, 1) => {}
            (EventPayload::BlueprintSet { .. }, _) => {
                return fail("blueprint can only be set right after Init".into())
            }
            (EventPayload::ExploreRound { parent, nodes, .. }, _) => {
                match self.effective_stage(parent) {
                    None => return fail(format!("explore on unknown node {parent}")),
                    Some(Stage::FineGrained) => {
                        return fail(format!("explore on {parent} while it is fine-grained"))
                    }
                    Some(Stage::Exploratory) => {}
                }
                self.activate(parent);
                self.stage = Some(Stage::Exploratory);
                self.record_nodes(index, nodes.iter().map(|n| (&n.id, n.stage)))?;
            }
            (EventPayload::RefineRun { start, nodes, outcome, .. }, _) => {
                match self.effective_stage(start) {
                    None => return fail(format!("refine on unknown node {start}")),
                    Some(Stage::Exploratory) => {
                        return fail(format!("refine on {start} before it was routed to fine-grained"))
                    }
                    Some(Stage::FineGrained) => {}
                }
                self.activate(start);
                self.record_nodes(index, nodes.iter().map(|n| (&n.id, n.stage)))?;
                if outcome.final_node != *start && !nodes.iter().any(|n| n.id == outcome.final_node) {
                    return fail("refine outcome names a node outside the run".into());
                }
                self.active = Some(outcome.final_node.clone());
                self.stage = Some(Stage::FineGrained);
            }
            (EventPayload::FeedbackApplied { node, feedback, .. }, _) => {
                if !self.stages.contains_key(node) {
                    return fail(format!("feedback on unknown node {node}"));
                }
                if feedback.trim().is_empty() {
                    return fail("feedback is empty".into());
                }
                self.activate(node);
            }
            (EventPayload::Routed { node, from, target, .. }, _) => {
                let Some(current) = self.effective_stage(node) else {
                    return fail(format!("route of unknown node {node}"));
                };
                if current != *from {
                    return fail(format!("route claims {from} but node {node} is {current}"));
                }
                if target == from {
                    return fail("route target equals current stage".into());
                }
                self.active = Some(node.clone());
                self.stage = Some(*target);
            }
            (EventPayload::SelfRanked { ranking }, _) => {
                if ranking.is_empty() {
                    return fail("empty ranking".into());
                }
                if let Some(entry) = ranking.iter().find(|e| !self.stages.contains_key(&e.node)) {
                    return fail(format!("ranking names unknown node {}", entry.node));
                }
            }
        }
        self.consumed += 1;
        self.last_id = Some(event.id.clone());
        Ok(())
    }

    fn record_nodes<'a>(
        &mut self,
        index: usize,
        nodes: impl Iterator<Item = (&'a NodeId, Stage)>,
    ) -> Result<(), TraceViolation> {
        for (id, stage) in nodes {
            if self.stages.insert(id.clone(), stage).is_some() {
                return Err(TraceViolation {
                    index,
                    rule: format!("node {id} created twice"),
                });
            }
        }
        Ok(())
    }
}

/// Checks an event log against the protocol grammar.
pub fn validate_trace(events: &[ProtocolEvent]) -> Result<(), TraceViolation> {
    let mut machine = TraceMachine::default();
    events.iter().try_for_each(|e| machine.step(e))
}
