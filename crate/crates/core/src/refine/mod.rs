//! Fine-grained stage: coarse-to-fine refinement of one hypothesis.
//!
//! Each abstraction level runs a greedy hill-climb on the scorer's average
//! and stops after `patience` consecutive steps without strict improvement.
//! The next level starts from the previous level's best node only once the
//! previous level has stopped.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::domain::{
    Cursor, DomainError, EvaluationScore, HypothesisNode, NodeId, NodeMint, ResearchContext,
    SearchTree, Stage, DEFAULT_CRITERIA,
};
use crate::llm::{field_or_raw, render_field, Gateway, GatewayError, GenerationRequest, TemplateId};

pub const DEFAULT_LEVELS: [&str; 3] = [
    "research direction: the core mechanism, key components and why they should work together",
    "methodology: the specific methods, materials, reagents or models and how they are combined",
    "experimental detail: concrete conditions, parameters, controls and measurements",
];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefineConfig {
    /// Level descriptors from coarsest to finest; shown to the proposer.
    pub levels: Vec<String>,
    pub proposals_per_step: usize,
    pub patience: usize,
    pub max_steps_per_level: usize,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            levels: DEFAULT_LEVELS.iter().map(|s| s.to_string()).collect(),
            proposals_per_step: 2,
            patience: 2,
            max_steps_per_level: 20,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<(), RefineError> {
        let bad = |msg: &str| Err(RefineError::InvalidConfig(msg.to_string()));
        if self.levels.is_empty() {
            return bad("levels must not be empty");
        }
        if self.proposals_per_step == 0 || self.patience == 0 || self.max_steps_per_level == 0 {
            return bad("proposals_per_step, patience and max_steps_per_level must be positive");
        }
        if self.patience > self.max_steps_per_level {
            return bad("patience must not exceed max_steps_per_level");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RefineError {
    #[error("level {level} out of range (have {levels} levels)")]
    LevelOutOfRange { level: usize, levels: usize },
    #[error("node {node} is treated as {stage}, expected fine-grained")]
    StageMismatch { node: NodeId, stage: Stage },
    #[error("hypothesis text is empty")]
    EmptyHypothesis,
    #[error("score unavailable: {reason}")]
    ScoreUnavailable { raw: String, reason: String },
    #[error("invalid refine config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Scores hypotheses on a configurable criterion set.
pub struct Scorer<'g> {
    gateway: &'g Gateway,
    criteria: Vec<String>,
}

impl<'g> Scorer<'g> {
    pub fn new(gateway: &'g Gateway, criteria: Vec<String>) -> Self {
        Self { gateway, criteria }
    }

    pub fn with_default_criteria(gateway: &'g Gateway) -> Self {
        Self::new(gateway, DEFAULT_CRITERIA.iter().map(|c| c.to_string()).collect())
    }

    pub fn criteria(&self) -> &[String] {
        &self.criteria
    }

    /// Per-criterion scores from the model; the average is computed here.
    pub fn score_hypothesis(
        &self,
        context: &ResearchContext,
        text: &str,
    ) -> Result<EvaluationScore, RefineError> {
        if text.trim().is_empty() {
            return Err(RefineError::EmptyHypothesis);
        }
        let schema: Vec<&str> = self.criteria.iter().map(String::as_str).collect();
        let criteria_list: Vec<String> = self.criteria.iter().map(|c| format!("- {c}")).collect();
        let example: Vec<String> = self.criteria.iter().map(|c| render_field(c, "7")).collect();
        let request = GenerationRequest::new(TemplateId::ScoreHypothesis)
            .var("background", context.render())
            .var("hypothesis", text)
            .var("criteria", criteria_list.join("\n"))
            .var("fields", example.join("\n"));
        self.gateway
            .complete_with(&request, &schema, |fields| {
                let mut values = BTreeMap::new();
                for (name, raw) in fields {
                    let value = leading_number(raw)
                        .ok_or_else(|| format!("{name} is not a number: {raw:?}"))?;
                    values.insert(name.clone(), value);
                }
                EvaluationScore::new(values).map_err(|e| e.to_string())
            })
            .map_err(|e| match e {
                GatewayError::ParseFailure { raw, reason } => {
                    RefineError::ScoreUnavailable { raw, reason }
                }
                other => other.into(),
            })
    }
}

fn leading_number(raw: &str) -> Option<f64> {
    let trimmed = raw.trim();
    let end = trimmed
        .char_indices()
        .find(|&(i, c)| !(c.is_ascii_digit() || c == '.' || (i == 0 && c == '-')))
        .map(|(i, _)| i)
        .unwrap_or(trimmed.len());
    trimmed[..end].parse().ok()
}

/// One proposal in the audit log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunLogRecord {
    pub step: usize,
    pub level: usize,
    pub candidate_digest: String,
    pub average: Option<f64>,
    pub accepted: bool,
}

pub fn digest_text(text: &str) -> String {
    hex::encode(&Sha256::digest(text.as_bytes())[..8])
}

/// Writes records as line-delimited JSON.
pub fn write_run_log(records: &[RunLogRecord], out: &mut impl Write) -> std::io::Result<()> {
    for record in records {
        serde_json::to_writer(&mut *out, record)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelTrace {
    pub level: usize,
    pub best_average: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineOutcome {
    pub final_node: NodeId,
    /// Proposal calls across all levels.
    pub steps_used: usize,
    pub per_level_trace: Vec<LevelTrace>,
}

/// Result of one level's hill-climb.
#[derive(Clone, Debug)]
pub struct LevelOutput {
    pub tree: SearchTree,
    pub best: NodeId,
    pub best_score: EvaluationScore,
    /// Proposal calls made at this level.
    pub steps: usize,
    pub accepted: Vec<NodeId>,
    pub log: Vec<RunLogRecord>,
}

/// Everything a refinement run produced, complete or not.
#[derive(Clone, Debug)]
pub struct RefineRun {
    pub tree: SearchTree,
    pub start_score: Option<EvaluationScore>,
    pub outcome: RefineOutcome,
    pub accepted: Vec<NodeId>,
    pub log: Vec<RunLogRecord>,
}

/// A run that stopped on an error; progress up to the error is kept.
#[derive(Debug, Clone, Error)]
#[error("refinement stopped: {error}")]
pub struct RefineFailure {
    pub partial: Box<RefineRun>,
    pub error: RefineError,
}

pub struct RefinementEngine<'g> {
    gateway: &'g Gateway,
    scorer: Scorer<'g>,
    config: RefineConfig,
}

impl<'g> RefinementEngine<'g> {
    pub fn new(gateway: &'g Gateway, scorer: Scorer<'g>, config: RefineConfig) -> Self {
        Self {
            gateway,
            scorer,
            config,
        }
    }

    pub fn config(&self) -> &RefineConfig {
        &self.config
    }

    pub fn scorer(&self) -> &Scorer<'g> {
        &self.scorer
    }

    /// One candidate revision of `current` aimed at `level`.
    pub fn propose_refinement(
        &self,
        context: &ResearchContext,
        current: Cursor<'_>,
        level: usize,
    ) -> Result<String, RefineError> {
        if level >= self.config.levels.len() {
            return Err(RefineError::LevelOutOfRange {
                level,
                levels: self.config.levels.len(),
            });
        }
        if current.stage != Stage::FineGrained {
            return Err(RefineError::StageMismatch {
                node: current.node.id.clone(),
                stage: current.stage,
            });
        }
        let request = GenerationRequest::new(TemplateId::ProposeRefinement)
            .var("background", context.render())
            .var("hypothesis", &current.node.text)
            .var("level", &self.config.levels[level])
            .var("level_index", (level + 1).to_string())
            .var("level_count", self.config.levels.len().to_string());
        let reply = self.gateway.complete(&request)?;
        Ok(field_or_raw(&reply.text, "hypothesis"))
    }

    /// Hill-climbs at one level starting from `start`, scoring it first.
    pub fn refine_level(
        &self,
        tree: &SearchTree,
        context: &ResearchContext,
        start: Cursor<'_>,
        level: usize,
        mint: &NodeMint<'_>,
    ) -> Result<LevelOutput, RefineError> {
        let start_score = self.scorer.score_hypothesis(context, &start.node.text)?;
        let mut log = Vec::new();
        self.climb(tree, context, start, start_score, level, mint, &mut log, 0)
            .map_err(|(_, e)| e)
    }

    /// On error returns the best state reached so far along with the error.
    #[allow(clippy::too_many_arguments, clippy::result_large_err)]
    fn climb(
        &self,
        tree: &SearchTree,
        context: &ResearchContext,
        start: Cursor<'_>,
        start_score: EvaluationScore,
        level: usize,
        mint: &NodeMint<'_>,
        log: &mut Vec<RunLogRecord>,
        step_offset: usize,
    ) -> Result<LevelOutput, (LevelOutput, RefineError)> {
        let mut out = LevelOutput {
            tree: tree.clone(),
            best: start.node.id.clone(),
            best_score: start_score,
            steps: 0,
            accepted: Vec::new(),
            log: Vec::new(),
        };
        if let Err(e) = self.config.validate() {
            return Err((out, e));
        }
        let mut stale = 0;
        for _ in 0..self.config.max_steps_per_level {
            let current = out.tree.node(&out.best).cloned().map_err(|e| (out.clone(), e.into()))?;
            let cursor = Cursor::routed(&current, Stage::FineGrained);
            let mut improved = false;
            for _ in 0..self.config.proposals_per_step {
                let candidate = match self.propose_refinement(context, cursor, level) {
                    Ok(text) => text,
                    Err(e) => return Err((out, e)),
                };
                out.steps += 1;
                let score = match self.scorer.score_hypothesis(context, &candidate) {
                    Ok(score) => Some(score),
                    Err(RefineError::ScoreUnavailable { .. } | RefineError::EmptyHypothesis) => {
                        None
                    }
                    Err(e) => return Err((out, e)),
                };
                let accepted = score
                    .as_ref()
                    .is_some_and(|s| s.average() > out.best_score.average());
                let record = RunLogRecord {
                    step: step_offset + out.steps,
                    level,
                    candidate_digest: digest_text(&candidate),
                    average: score.as_ref().map(EvaluationScore::average),
                    accepted,
                };
                log.push(record.clone());
                out.log.push(record);
                if let (true, Some(score)) = (accepted, score) {
                    let node = HypothesisNode::fine_grained(
                        mint.next_id(),
                        &current,
                        candidate,
                        level as u32,
                        Some(score.clone()),
                        mint.event().clone(),
                    );
                    let id = node.id.clone();
                    if let Err(e) = out.tree.attach_in_place(&current.id, node) {
                        return Err((out, e.into()));
                    }
                    out.accepted.push(id.clone());
                    out.best = id;
                    out.best_score = score;
                    improved = true;
                }
            }
            if improved {
                stale = 0;
            } else {
                stale += 1;
                if stale >= self.config.patience {
                    break;
                }
            }
        }
        Ok(out)
    }

    /// Runs every level in coarse-to-fine order, seeding each level with the
    /// previous level's best node.
    pub fn refine_hierarchical(
        &self,
        tree: &SearchTree,
        context: &ResearchContext,
        start: Cursor<'_>,
        mint: &NodeMint<'_>,
    ) -> Result<RefineRun, RefineFailure> {
        let mut run = RefineRun {
            tree: tree.clone(),
            start_score: None,
            outcome: RefineOutcome {
                final_node: start.node.id.clone(),
                steps_used: 0,
                per_level_trace: Vec::new(),
            },
            accepted: Vec::new(),
            log: Vec::new(),
        };
        let fail = |run: RefineRun, error: RefineError| RefineFailure {
            partial: Box::new(run),
            error,
        };
        if let Err(e) = self.config.validate() {
            return Err(fail(run, e));
        }
        if start.stage != Stage::FineGrained {
            let error = RefineError::StageMismatch {
                node: start.node.id.clone(),
                stage: start.stage,
            };
            return Err(fail(run, error));
        }
        let mut best_score = match self.scorer.score_hypothesis(context, &start.node.text) {
            Ok(score) => score,
            Err(e) => return Err(fail(run, e)),
        };
        run.start_score = Some(best_score.clone());

        for level in 0..self.config.levels.len() {
            let seed = run.tree.node(&run.outcome.final_node).cloned();
            let seed = match seed {
                Ok(node) => node,
                Err(e) => return Err(fail(run, e.into())),
            };
            let result = self.climb(
                &run.tree,
                context,
                Cursor::routed(&seed, Stage::FineGrained),
                best_score.clone(),
                level,
                mint,
                &mut run.log,
                run.outcome.steps_used,
            );
            let (level_out, error) = match result {
                Ok(out) => (out, None),
                Err((out, e)) => (out, Some(e)),
            };
            run.tree = level_out.tree;
            run.accepted.extend(level_out.accepted);
            run.outcome.final_node = level_out.best;
            run.outcome.steps_used += level_out.steps;
            run.outcome.per_level_trace.push(LevelTrace {
                level,
                best_average: level_out.best_score.average(),
                steps: level_out.steps,
            });
            best_score = level_out.best_score;
            if let Some(e) = error {
                return Err(fail(run, e));
            }
        }
        Ok(run)
    }
}
