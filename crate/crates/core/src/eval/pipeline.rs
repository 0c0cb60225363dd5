//! Pipeline compositions and the runner that executes them on one entry.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use super::dataset::GroundTruthEntry;
use super::oracle::{leak_check, oracle_feedback, oracle_rank, FeedbackStrength, OracleError};
use super::recall::compute_recall;
use crate::domain::{IdGen, InspirationCorpus, NodeId, Stage};
use crate::explore::{ExploreConfig, ExploratoryEngine};
use crate::llm::{Gateway, TemplateId};
use crate::protocol::{
    Chooser, EventKind, EventPayload, ProtocolError, ProtocolEvent, Session, SessionExport,
};
use crate::refine::{RefineConfig, RefinementEngine, Scorer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ranking {
    SelfRank,
    OracleRank,
    None,
}

/// One pipeline composition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PipelineSpec {
    pub name: String,
    /// Run exploration rounds before anything else.
    pub explore: bool,
    pub use_blueprint: bool,
    pub ranking: Ranking,
    pub feedback_rounds: u32,
    pub feedback_strength: FeedbackStrength,
    pub run_refinement: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid pipeline {name}: {reason}")]
pub struct PipelineSpecError {
    pub name: String,
    pub reason: String,
}

impl PipelineSpec {
    pub fn validate(&self) -> Result<(), PipelineSpecError> {
        let bad = |reason: &str| {
            Err(PipelineSpecError {
                name: self.name.clone(),
                reason: reason.to_string(),
            })
        };
        if !self.explore && !self.run_refinement {
            return bad("pipeline neither explores nor refines");
        }
        if self.feedback_rounds > 0 && self.ranking == Ranking::None {
            return bad("feedback rounds need a ranking to pick their target");
        }
        if self.feedback_rounds > 0 && !self.run_refinement && !self.explore {
            return bad("feedback rounds need a refinement or exploration continuation");
        }
        Ok(())
    }

    /// Stage a feedback round continues in.
    pub fn continuation(&self) -> Stage {
        if self.run_refinement {
            Stage::FineGrained
        } else {
            Stage::Exploratory
        }
    }
}

/// A named row of the standard comparison, with its description string.
#[derive(Clone, Debug)]
pub struct PipelineRow {
    pub spec: PipelineSpec,
    pub description: &'static str,
}

#[allow(clippy::too_many_arguments)]
fn row(
    name: &str,
    description: &'static str,
    explore: bool,
    use_blueprint: bool,
    ranking: Ranking,
    feedback_rounds: u32,
    feedback_strength: FeedbackStrength,
    run_refinement: bool,
) -> PipelineRow {
    PipelineRow {
        spec: PipelineSpec {
            name: name.to_string(),
            explore,
            use_blueprint,
            ranking,
            feedback_rounds,
            feedback_strength,
            run_refinement,
        },
        description,
    }
}

/// The fifteen standard compositions. MC is inspiration-driven exploration,
/// MC2 is hierarchical refinement.
pub fn standard_pipelines() -> Vec<PipelineRow> {
    use FeedbackStrength::*;
    use Ranking::*;
    let mut rows = vec![
        row("baseline_MC", "MC", true, false, None, 0, Standard, false),
        row("baseline_MC2", "MC2", false, false, None, 0, Standard, true),
        row("MC_with_hint", "MC + initial blueprint", true, true, None, 0, Standard, false),
        row(
            "MC_with_soft_feedback_with_hint",
            "MC + initial blueprint + (oracle ranking + soft feedback) + MC",
            true, true, OracleRank, 1, Soft, false,
        ),
        row(
            "MC_with_feedback_with_hint",
            "MC + initial blueprint + (oracle ranking + feedback) + MC",
            true, true, OracleRank, 1, Standard, false,
        ),
        row(
            "MC2_with_MC_input_self_rank",
            "MC + initial blueprint + (self-ranking) + MC2",
            true, true, SelfRank, 0, Standard, true,
        ),
        row(
            "MC2_with_MC_input_oracle_rank",
            "MC + initial blueprint + (oracle-ranking) + MC2",
            true, true, OracleRank, 0, Standard, true,
        ),
    ];
    const STANDARD: [&str; 4] = [
        "MC + initial blueprint + (oracle-ranking) + MC2 + [(oracle ranking + feedback) + MC2]x1",
        "MC + initial blueprint + (oracle-ranking) + MC2 + [(oracle ranking + feedback) + MC2]x2",
        "MC + initial blueprint + (oracle-ranking) + MC2 + [(oracle ranking + feedback) + MC2]x3",
        "MC + initial blueprint + (oracle-ranking) + MC2 + [(oracle ranking + feedback) + MC2]x4",
    ];
    const STRONG: [&str; 4] = [
        "MC + initial blueprint + (oracle-ranking) + MC2 + [(oracle ranking + strong feedback) + MC2]x1",
        "MC + initial blueprint + (oracle-ranking) + MC2 + [(oracle ranking + strong feedback) + MC2]x2",
        "MC + initial blueprint + (oracle-ranking) + MC2 + [(oracle ranking + strong feedback) + MC2]x3",
        "MC + initial blueprint + (oracle-ranking) + MC2 + [(oracle ranking + strong feedback) + MC2]x4",
    ];
    for (strength, label, descriptions) in [(Standard, "feedback", STANDARD), (Strong, "strong_feedback", STRONG)] {
        for (i, description) in descriptions.into_iter().enumerate() {
            let rounds = i as u32 + 1;
            let times = if rounds == 1 { String::new() } else { format!("_x{rounds}") };
            rows.push(row(
                &format!("MC2_with_{label}{times}_oracle_rank"),
                description,
                true, true, OracleRank, rounds, strength, true,
            ));
        }
    }
    rows
}

pub fn find_pipeline(name: &str) -> Option<PipelineRow> {
    standard_pipelines().into_iter().find(|r| r.spec.name == name)
}

/// One step of a run, as recorded in its report.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StageLabel {
    Blueprint,
    Explore,
    SelfRank,
    OracleRank,
    Route { from: Stage, to: Stage },
    Refine,
    Feedback(FeedbackStrength),
}

impl StageLabel {
    /// Event this step leaves in the session log; oracle ranking leaves none.
    pub fn event_kind(self) -> Option<EventKind> {
        match self {
            StageLabel::Blueprint => Some(EventKind::BlueprintSet),
            StageLabel::Explore => Some(EventKind::ExploreRound),
            StageLabel::SelfRank => Some(EventKind::SelfRanked),
            StageLabel::OracleRank => None,
            StageLabel::Route { .. } => Some(EventKind::Routed),
            StageLabel::Refine => Some(EventKind::RefineRun),
            StageLabel::Feedback(_) => Some(EventKind::FeedbackApplied),
        }
    }
}

impl fmt::Display for StageLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StageLabel::Blueprint => f.write_str("Blueprint"),
            StageLabel::Explore => f.write_str("Explore"),
            StageLabel::SelfRank => f.write_str("SelfRank"),
            StageLabel::OracleRank => f.write_str("OracleRank"),
            StageLabel::Route { from, to } => write!(f, "Route({}→{})", from.short(), to.short()),
            StageLabel::Refine => f.write_str("Refine"),
            StageLabel::Feedback(FeedbackStrength::Standard) => f.write_str("Feedback"),
            StageLabel::Feedback(s) => write!(f, "Feedback({s})"),
        }
    }
}

impl std::str::FromStr for StageLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(match s {
            "Blueprint" => StageLabel::Blueprint,
            "Explore" => StageLabel::Explore,
            "SelfRank" => StageLabel::SelfRank,
            "OracleRank" => StageLabel::OracleRank,
            "Route(C→E)" => StageLabel::Route { from: Stage::Exploratory, to: Stage::FineGrained },
            "Route(E→C)" => StageLabel::Route { from: Stage::FineGrained, to: Stage::Exploratory },
            "Refine" => StageLabel::Refine,
            "Feedback" => StageLabel::Feedback(FeedbackStrength::Standard),
            "Feedback(Soft)" => StageLabel::Feedback(FeedbackStrength::Soft),
            "Feedback(Strong)" => StageLabel::Feedback(FeedbackStrength::Strong),
            other => return Err(format!("unknown stage label {other}")),
        })
    }
}

impl Serialize for StageLabel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for StageLabel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// True when the labels, minus oracle ranking, match the log after Init.
pub fn labels_match_events(labels: &[StageLabel], events: &[ProtocolEvent]) -> bool {
    let expected: Vec<EventKind> = labels.iter().filter_map(|l| l.event_kind()).collect();
    let actual: Vec<EventKind> = events.iter().skip(1).map(ProtocolEvent::kind).collect();
    expected == actual
}

/// Settings shared by every run of a batch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnessConfig {
    pub explore: ExploreConfig,
    pub refine: RefineConfig,
    /// Exploration rounds per MC step, chained through each round's top child.
    pub explore_rounds: usize,
    pub criteria: Vec<String>,
    pub seed: u64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            explore: ExploreConfig::default(),
            refine: RefineConfig::default(),
            explore_rounds: 3,
            criteria: crate::domain::DEFAULT_CRITERIA.iter().map(|c| c.to_string()).collect(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub entry_id: String,
    pub pipeline: String,
    pub recall: f64,
    /// Refinement proposals across the whole run.
    pub search_steps: u64,
    /// Proposals per refinement run, in order.
    pub refine_steps: Vec<u64>,
    /// Proposal calls the gateway served during the run.
    pub proposal_calls: u64,
    pub stage_sequence: Vec<StageLabel>,
    pub final_node: Option<NodeId>,
    pub final_hypothesis: String,
    pub export_digest: String,
    pub complete: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunReport {
    /// Proposals of the last refinement run: the work left after any feedback.
    pub fn final_refine_steps(&self) -> Option<u64> {
        self.refine_steps.last().copied()
    }
}

/// A finished or aborted run: its report and the session behind it.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub export: Option<SessionExport>,
}

#[derive(Debug, Error)]
enum RunError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("{0}")]
    Other(String),
}

/// Blueprint used by hint pipelines: the survey's first two sentences plus the question.
pub fn hint_blueprint(entry: &GroundTruthEntry) -> String {
    let mut sentences = Vec::new();
    let mut current = String::new();
    for ch in entry.survey.chars() {
        current.push(ch);
        if matches!(ch, '.' | '!' | '?') {
            let s = current.trim().to_string();
            if !s.is_empty() {
                sentences.push(s);
            }
            current.clear();
            if sentences.len() == 2 {
                break;
            }
        }
    }
    if sentences.len() < 2 && !current.trim().is_empty() {
        sentences.push(current.trim().to_string());
    }
    let mut text = sentences.join(" ");
    if !text.is_empty() {
        text.push(' ');
    }
    text.push_str("Focus question: ");
    text.push_str(entry.question.trim());
    text
}

struct Runner<'a> {
    spec: &'a PipelineSpec,
    entry: &'a GroundTruthEntry,
    gateway: &'a Gateway,
    oracle: &'a Gateway,
    config: &'a HarnessConfig,
    labels: Vec<StageLabel>,
    refine_steps: Vec<u64>,
    final_node: Option<NodeId>,
}

impl<'a> Runner<'a> {
    fn explorer(&self) -> ExploratoryEngine<'a> {
        ExploratoryEngine::new(self.gateway, self.config.explore.clone())
    }

    fn scorer(&self) -> Scorer<'a> {
        Scorer::new(self.gateway, self.config.criteria.clone())
    }

    fn refiner(&self) -> RefinementEngine<'a> {
        RefinementEngine::new(self.gateway, self.scorer(), self.config.refine.clone())
    }

    /// `explore_rounds` chained rounds from `start`; returns the last round's nodes.
    fn explore_chain(&mut self, session: &mut Session, start: &NodeId) -> Result<Vec<NodeId>, RunError> {
        let engine = self.explorer();
        let mut parent = start.clone();
        let mut last = Vec::new();
        for _ in 0..self.config.explore_rounds {
            let event = session.explore(&engine, &parent)?;
            self.labels.push(StageLabel::Explore);
            last = event.payload.new_nodes().iter().map(|n| n.id.clone()).collect();
            parent = last.first().cloned().ok_or_else(|| RunError::Other("exploration produced no nodes".into()))?;
        }
        if let Some(top) = last.first() {
            self.final_node = Some(top.clone());
        }
        Ok(last)
    }

    fn choose(&mut self, session: &mut Session, candidates: Vec<NodeId>) -> Result<NodeId, RunError> {
        match self.spec.ranking {
            Ranking::None => candidates.into_iter().next().ok_or_else(|| RunError::Other("nothing to choose from".into())),
            Ranking::SelfRank => {
                let ranking = session.self_rank(&self.scorer(), &candidates)?;
                self.labels.push(StageLabel::SelfRank);
                Ok(ranking[0].node.clone())
            }
            Ranking::OracleRank => {
                let texts: Vec<(NodeId, &str)> = candidates
                    .iter()
                    .map(|id| Ok((id.clone(), session.tree().node(id).map_err(ProtocolError::from)?.text.as_str())))
                    .collect::<Result<_, RunError>>()?;
                self.labels.push(StageLabel::OracleRank);
                Ok(oracle_rank(&texts, self.entry).remove(0))
            }
        }
    }

    fn chooser(&self) -> Option<Chooser> {
        match self.spec.ranking {
            Ranking::SelfRank => Some(Chooser::SelfRank),
            Ranking::OracleRank => Some(Chooser::OracleRank),
            Ranking::None => None,
        }
    }

    fn refine(&mut self, session: &mut Session, node: &NodeId) -> Result<(), RunError> {
        self.labels.push(StageLabel::Refine);
        let result = session.refine(&self.refiner(), node).map(|_| ());
        if let Some(ProtocolEvent {
            payload: EventPayload::RefineRun { outcome, .. },
            ..
        }) = session.events().last()
        {
            self.refine_steps.push(outcome.steps_used as u64);
            self.final_node = Some(outcome.final_node.clone());
        }
        result.map_err(Into::into)
    }

    fn leaves_of(session: &Session, stage: Stage) -> Vec<NodeId> {
        session
            .tree()
            .leaves()
            .into_iter()
            .filter(|n| n.stage == stage)
            .map(|n| n.id.clone())
            .collect()
    }

    fn feedback_text(&self, hypothesis: &str) -> Result<String, RunError> {
        match oracle_feedback(self.oracle, hypothesis, self.entry, self.spec.feedback_strength) {
            Ok(text) => Ok(text),
            Err(OracleError::LeakUnfixable { redacted, .. })
                if !redacted.trim().is_empty() && leak_check(&redacted, self.entry).passed() =>
            {
                Ok(redacted)
            }
            Err(e) => Err(e.into()),
        }
    }

    fn run(&mut self, session: &mut Session) -> Result<(), RunError> {
        let root = session.tree().root_id().clone();
        if self.spec.use_blueprint {
            self.labels.push(StageLabel::Blueprint);
        }
        self.final_node = Some(root.clone());
        if self.spec.explore {
            self.explore_chain(session, &root)?;
        }
        if self.spec.run_refinement {
            let seed = if self.spec.explore {
                let leaves = Self::leaves_of(session, Stage::Exploratory);
                match self.spec.ranking {
                    Ranking::None => self.final_node.clone().expect("set by exploration"),
                    _ => self.choose(session, leaves)?,
                }
            } else {
                root.clone()
            };
            session.route_from(&seed, Stage::FineGrained, self.chooser())?;
            self.labels.push(StageLabel::Route {
                from: Stage::Exploratory,
                to: Stage::FineGrained,
            });
            self.refine(session, &seed)?;
        }
        for _ in 0..self.spec.feedback_rounds {
            let continuation = self.spec.continuation();
            let mut candidates = Self::leaves_of(session, continuation);
            if candidates.is_empty() {
                candidates.extend(self.final_node.clone());
            }
            let target = self.choose(session, candidates)?;
            let text = session.tree().node(&target).map_err(ProtocolError::from)?.text.clone();
            let feedback = self.feedback_text(&text)?;
            session.apply_feedback_from(&target, &feedback, self.chooser())?;
            self.labels.push(StageLabel::Feedback(self.spec.feedback_strength));
            match continuation {
                Stage::FineGrained => self.refine(session, &target)?,
                Stage::Exploratory => {
                    self.explore_chain(session, &target)?;
                }
            }
        }
        Ok(())
    }
}

/// Runs one pipeline on one entry. `gateway` serves the engines and
/// `oracle` the simulated navigator; they may be the same gateway.
/// Failures produce a report flagged incomplete rather than an error.
pub fn run_pipeline(
    spec: &PipelineSpec,
    entry: &GroundTruthEntry,
    corpus: Arc<InspirationCorpus>,
    config: &HarnessConfig,
    gateway: &Gateway,
    oracle: &Gateway,
    ids: IdGen,
) -> RunOutput {
    let proposals_before = gateway.calls_for(TemplateId::ProposeRefinement);
    let mut runner = Runner {
        spec,
        entry,
        gateway,
        oracle,
        config,
        labels: Vec::new(),
        refine_steps: Vec::new(),
        final_node: None,
    };
    let blueprint = spec.use_blueprint.then(|| hint_blueprint(entry));
    let survey = (!entry.survey.trim().is_empty()).then(|| entry.survey.clone());
    let started = spec
        .validate()
        .map_err(|e| e.to_string())
        .and_then(|_| Session::init(&entry.question, survey, blueprint, corpus, ids).map_err(|e| e.to_string()));
    let mut session = match started {
        Ok(session) => session,
        Err(error) => {
            return RunOutput {
                report: RunReport {
                    entry_id: entry.id.clone(),
                    pipeline: spec.name.clone(),
                    recall: 0.0,
                    search_steps: 0,
                    refine_steps: Vec::new(),
                    proposal_calls: 0,
                    stage_sequence: Vec::new(),
                    final_node: None,
                    final_hypothesis: String::new(),
                    export_digest: String::new(),
                    complete: false,
                    error: Some(error),
                },
                export: None,
            }
        }
    };
    let outcome = runner.run(&mut session);
    let final_hypothesis = runner
        .final_node
        .as_ref()
        .and_then(|id| session.tree().get(id))
        .map(|n| n.text.clone())
        .unwrap_or_default();
    let export = session.export();
    let json = export.to_json();
    RunOutput {
        report: RunReport {
            entry_id: entry.id.clone(),
            pipeline: spec.name.clone(),
            recall: compute_recall(&final_hypothesis, entry),
            search_steps: runner.refine_steps.iter().sum(),
            refine_steps: runner.refine_steps,
            proposal_calls: gateway.calls_for(TemplateId::ProposeRefinement) - proposals_before,
            stage_sequence: runner.labels,
            final_node: runner.final_node,
            final_hypothesis,
            export_digest: hex::encode(Sha256::digest(json.as_bytes())),
            complete: outcome.is_ok(),
            error: outcome.err().map(|e| e.to_string()),
        },
        export: Some(export),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("cannot interpret {item:?}: {reason}")]
pub struct InterpretError {
    pub item: String,
    pub reason: String,
}

/// Splits on top-level `+`, ignoring separators inside brackets.
fn split_top(text: &str) -> Vec<String> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut current = String::new();
    for ch in text.chars() {
        match ch {
            '(' | '[' => depth += 1,
            ')' | ']' => depth -= 1,
            _ => {}
        }
        if ch == '+' && depth == 0 {
            parts.push(current.trim().to_string());
            current.clear();
        } else {
            current.push(ch);
        }
    }
    parts.push(current.trim().to_string());
    parts.retain(|p| !p.is_empty());
    parts
}

struct Interpreter {
    explore_rounds: usize,
    stage: Stage,
    blueprint: bool,
    labels: Vec<StageLabel>,
}

impl Interpreter {
    fn item(&mut self, item: &str) -> Result<(), InterpretError> {
        let fail = |reason: &str| {
            Err(InterpretError {
                item: item.to_string(),
                reason: reason.to_string(),
            })
        };
        let lower = item.trim().to_lowercase();
        if let Some(inner) = lower.strip_prefix('[') {
            let Some((body, times)) = inner.rsplit_once("]x") else {
                return fail("repeat group must end with ]xN");
            };
            let Ok(times) = times.trim().parse::<usize>() else {
                return fail("repeat count is not a number");
            };
            for _ in 0..times {
                for part in split_top(body) {
                    self.item(&part)?;
                }
            }
            return Ok(());
        }
        if let Some(inner) = lower.strip_prefix('(').and_then(|s| s.strip_suffix(')')) {
            for part in split_top(inner) {
                self.item(&part)?;
            }
            return Ok(());
        }
        match lower.as_str() {
            "mc" => {
                if self.stage == Stage::FineGrained {
                    self.labels.push(StageLabel::Route { from: Stage::FineGrained, to: Stage::Exploratory });
                    self.stage = Stage::Exploratory;
                }
                self.labels.extend(std::iter::repeat_n(StageLabel::Explore, self.explore_rounds));
            }
            "mc2" => {
                if self.stage == Stage::Exploratory {
                    self.labels.push(StageLabel::Route { from: Stage::Exploratory, to: Stage::FineGrained });
                    self.stage = Stage::FineGrained;
                }
                self.labels.push(StageLabel::Refine);
            }
            "initial blueprint" => self.blueprint = true,
            "oracle ranking" | "oracle-ranking" => self.labels.push(StageLabel::OracleRank),
            "self ranking" | "self-ranking" => self.labels.push(StageLabel::SelfRank),
            "feedback" => self.labels.push(StageLabel::Feedback(FeedbackStrength::Standard)),
            "soft feedback" => self.labels.push(StageLabel::Feedback(FeedbackStrength::Soft)),
            "strong feedback" => self.labels.push(StageLabel::Feedback(FeedbackStrength::Strong)),
            _ => return fail("unknown step"),
        }
        Ok(())
    }
}

/// Reference reading of a description string into stage labels.
///
/// A blueprint is a root constraint, so it is placed first wherever it
/// appears. Each MC expands to `explore_rounds` exploration steps, and a
/// route is inserted whenever a step needs the other stage.
pub fn interpret(description: &str, explore_rounds: usize) -> Result<Vec<StageLabel>, InterpretError> {
    let mut interpreter = Interpreter {
        explore_rounds,
        stage: Stage::Exploratory,
        blueprint: false,
        labels: Vec::new(),
    };
    for item in split_top(description) {
        interpreter.item(&item)?;
    }
    let mut labels = Vec::with_capacity(interpreter.labels.len() + 1);
    if interpreter.blueprint {
        labels.push(StageLabel::Blueprint);
    }
    labels.extend(interpreter.labels);
    Ok(labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fifteen_valid_rows_with_unique_names() {
        let rows = standard_pipelines();
        assert_eq!(rows.len(), 15);
        let mut names: Vec<&str> = rows.iter().map(|r| r.spec.name.as_str()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), 15);
        for r in &rows {
            r.spec.validate().unwrap();
        }
        assert!(find_pipeline("MC2_with_strong_feedback_x4_oracle_rank").is_some());
    }

    #[test]
    fn interpreter_reads_feedback_rows() {
        use StageLabel::*;
        let c_to_e = Route { from: Stage::Exploratory, to: Stage::FineGrained };
        let labels = interpret(
            "MC + initial blueprint + (oracle-ranking) + MC2 + [(oracle ranking + feedback) + MC2]x1",
            2,
        )
        .unwrap();
        assert_eq!(
            labels,
            [Blueprint, Explore, Explore, OracleRank, c_to_e, Refine, OracleRank,
             Feedback(FeedbackStrength::Standard), Refine]
        );
        assert_eq!(interpret("MC2", 3).unwrap(), [c_to_e, Refine]);
        assert_eq!(interpret("MC", 1).unwrap(), [Explore]);
        assert!(interpret("MC + teleport", 1).is_err());
    }

    #[test]
    fn interpreter_routes_back_for_exploration() {
        let labels = interpret("MC2 + MC", 1).unwrap();
        assert_eq!(labels[2], StageLabel::Route { from: Stage::FineGrained, to: Stage::Exploratory });
    }

    #[test]
    fn labels_round_trip_through_text() {
        for label in [
            StageLabel::Route { from: Stage::FineGrained, to: Stage::Exploratory },
            StageLabel::Feedback(FeedbackStrength::Soft),
            StageLabel::Feedback(FeedbackStrength::Standard),
            StageLabel::OracleRank,
        ] {
            assert_eq!(label.to_string().parse::<StageLabel>().unwrap(), label);
        }
    }

    #[test]
    fn hint_takes_two_sentences() {
        let entry = GroundTruthEntry {
            id: "x".into(),
            question: "Why?".into(),
            survey: "One. Two! Three.".into(),
            fine_grained_hypothesis: "h".into(),
            elements: vec!["e".into()],
        };
        assert_eq!(hint_blueprint(&entry), "One. Two! Focus question: Why?");
    }

    #[test]
    fn invalid_specs() {
        let mut spec = standard_pipelines()[0].spec.clone();
        spec.explore = false;
        assert!(spec.validate().is_err());
        let mut spec = standard_pipelines()[7].spec.clone();
        spec.ranking = Ranking::None;
        assert!(spec.validate().is_err());
    }
}
