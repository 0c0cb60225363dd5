use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::error::DomainError;
use super::ids::{EventId, InspirationId, NodeId};

/// Which half of the search a node belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    /// Divergent inspiration-driven search over coarse directions.
    Exploratory,
    /// Convergent refinement toward an executable hypothesis.
    FineGrained,
}

impl Stage {
    pub fn other(self) -> Stage {
        match self {
            Stage::Exploratory => Stage::FineGrained,
            Stage::FineGrained => Stage::Exploratory,
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            Stage::Exploratory => "C",
            Stage::FineGrained => "E",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Exploratory => "exploratory",
            Stage::FineGrained => "fine_grained",
        })
    }
}

/// Default evaluation criteria used by the scorer.
pub const DEFAULT_CRITERIA: [&str; 4] = ["plausibility", "novelty", "specificity", "feasibility"];

pub const MIN_SCORE: f64 = 0.0;
pub const MAX_SCORE: f64 = 10.0;

#[derive(Deserialize)]
struct RawScore {
    criteria: BTreeMap<String, f64>,
    average: f64,
}

/// Per-criterion scores in `[0, 10]` plus their arithmetic mean.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawScore")]
pub struct EvaluationScore {
    criteria: BTreeMap<String, f64>,
    average: f64,
}

impl EvaluationScore {
    pub fn new(criteria: BTreeMap<String, f64>) -> Result<Self, DomainError> {
        if criteria.is_empty() {
            return Err(DomainError::InvalidScore("no criteria".into()));
        }
        for (name, value) in &criteria {
            if !value.is_finite() || !(MIN_SCORE..=MAX_SCORE).contains(value) {
                return Err(DomainError::InvalidScore(format!(
                    "{name} = {value} outside [0, 10]"
                )));
            }
        }
        let average = criteria.values().sum::<f64>() / criteria.len() as f64;
        Ok(Self { criteria, average })
    }

    pub fn criteria(&self) -> &BTreeMap<String, f64> {
        &self.criteria
    }

    pub fn average(&self) -> f64 {
        self.average
    }
}

impl TryFrom<RawScore> for EvaluationScore {
    type Error = DomainError;

    fn try_from(raw: RawScore) -> Result<Self, Self::Error> {
        let score = EvaluationScore::new(raw.criteria)?;
        if (score.average - raw.average).abs() > 1e-9 {
            return Err(DomainError::InvalidScore(format!(
                "stored average {} differs from mean {}",
                raw.average, score.average
            )));
        }
        Ok(score)
    }
}

/// One hypothesis state in a session's search tree.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HypothesisNode {
    pub id: NodeId,
    pub parent: Option<NodeId>,
    pub stage: Stage,
    pub text: String,
    pub step_index: u32,
    pub inspiration_used: Option<InspirationId>,
    pub abstraction_level: Option<u32>,
    pub scores: Option<EvaluationScore>,
    pub created_by_event: EventId,
}

impl HypothesisNode {
    pub fn root(id: NodeId, text: String, created_by_event: EventId) -> Self {
        Self {
            id,
            parent: None,
            stage: Stage::Exploratory,
            text,
            step_index: 0,
            inspiration_used: None,
            abstraction_level: None,
            scores: None,
            created_by_event,
        }
    }

    /// An exploratory child produced by associating `inspiration` with `parent`.
    pub fn exploratory(
        id: NodeId,
        parent: &HypothesisNode,
        text: String,
        inspiration: InspirationId,
        created_by_event: EventId,
    ) -> Self {
        Self {
            id,
            parent: Some(parent.id.clone()),
            stage: Stage::Exploratory,
            text,
            step_index: child_step_index(parent, Stage::Exploratory),
            inspiration_used: Some(inspiration),
            abstraction_level: None,
            scores: None,
            created_by_event,
        }
    }

    /// A fine-grained child refined from `parent` at `level`.
    pub fn fine_grained(
        id: NodeId,
        parent: &HypothesisNode,
        text: String,
        level: u32,
        scores: Option<EvaluationScore>,
        created_by_event: EventId,
    ) -> Self {
        Self {
            id,
            parent: Some(parent.id.clone()),
            stage: Stage::FineGrained,
            text,
            step_index: child_step_index(parent, Stage::FineGrained),
            inspiration_used: None,
            abstraction_level: Some(level),
            scores,
            created_by_event,
        }
    }

    pub fn is_root(&self) -> bool {
        self.parent.is_none()
    }

    /// Checks the stage-specific field rules for a non-root node.
    pub fn stage_fields_consistent(&self) -> bool {
        match self.stage {
            Stage::Exploratory => {
                self.abstraction_level.is_none()
                    && (self.is_root() == self.inspiration_used.is_none())
            }
            Stage::FineGrained => {
                !self.is_root() && self.abstraction_level.is_some() && self.inspiration_used.is_none()
            }
        }
    }
}

/// A node together with the stage the session currently treats it as.
///
/// Usually `stage == node.stage`; after a route the node keeps its own stage
/// while engines treat it as the routed target.
#[derive(Clone, Copy, Debug)]
pub struct Cursor<'a> {
    pub node: &'a HypothesisNode,
    pub stage: Stage,
}

impl<'a> Cursor<'a> {
    pub fn at(node: &'a HypothesisNode) -> Self {
        Self {
            node,
            stage: node.stage,
        }
    }

    pub fn routed(node: &'a HypothesisNode, stage: Stage) -> Self {
        Self { node, stage }
    }
}

/// Step index a child of `parent` at `stage` must carry.
pub fn child_step_index(parent: &HypothesisNode, stage: Stage) -> u32 {
    if parent.stage == stage {
        parent.step_index + 1
    } else {
        1
    }
}
