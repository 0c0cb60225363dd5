use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::event::{Chooser, EventPayload, ProtocolEvent, RankEntry};
use super::trace::TraceMachine;
use super::ProtocolError;
use crate::domain::{
    ContextAddition, Cursor, DomainError, EventId, GuidingSignal, HypothesisNode, IdGen,
    InspirationCorpus, NodeId, NodeMint, ResearchContext, SearchTree, SessionId, Stage,
};
use crate::explore::ExploratoryEngine;
use crate::refine::{RefineError, RefinementEngine, Scorer};

/// Inputs a session was created from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaseInputs {
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub survey: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blueprint: Option<String>,
    pub corpus_ref: String,
}

/// Persistence and replay-fixture format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SessionExport {
    pub session_id: SessionId,
    pub base: BaseInputs,
    pub stage_of_active: Stage,
    pub events: Vec<ProtocolEvent>,
    pub tree: SearchTree,
}

impl SessionExport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("session export serializes")
    }
}

/// Everything derivable from the event log.
///
/// `stage_of_active` is the stage the active node is treated as. It differs
/// from the node's own stage right after a route, until an engine call
/// creates nodes of the target stage.
#[derive(Clone, Debug)]
pub struct SessionState {
    session_id: SessionId,
    base_context: ResearchContext,
    corpus_ref: String,
    tree: SearchTree,
    events: Vec<ProtocolEvent>,
    machine: TraceMachine,
}

impl SessionState {
    /// Rebuilds a state by applying `events` in order.
    pub fn replay(session_id: SessionId, events: &[ProtocolEvent]) -> Result<Self, ProtocolError> {
        let (first, rest) = events
            .split_first()
            .ok_or_else(|| ProtocolError::CorruptSession("event log is empty".into()))?;
        let mut state = Self::from_init(session_id, first.clone())?;
        for event in rest {
            state.apply(event.clone())?;
        }
        if state.tree.root().text != state.base_context.seed_text() {
            return Err(ProtocolError::CorruptSession(
                "root text does not match the base inputs".into(),
            ));
        }
        Ok(state)
    }

    fn from_init(session_id: SessionId, event: ProtocolEvent) -> Result<Self, ProtocolError> {
        let mut machine = TraceMachine::default();
        machine.step(&event)?;
        check_digest(&event, "")?;
        let EventPayload::Init {
            question,
            survey,
            corpus_ref,
            root,
        } = &event.payload
        else {
            unreachable!("trace machine accepts only Init first");
        };
        let base_context = ResearchContext::new(question.clone(), survey.clone(), None)?;
        if root.created_by_event != event.id || root.step_index != 0 {
            return Err(ProtocolError::CorruptSession("malformed root node".into()));
        }
        let tree = SearchTree::from_root(root.clone());
        Ok(Self {
            session_id,
            base_context,
            corpus_ref: corpus_ref.clone(),
            tree,
            events: vec![event],
            machine,
        })
    }

    /// The single mutation path shared by live operations and replay.
    fn apply(&mut self, event: ProtocolEvent) -> Result<(), ProtocolError> {
        self.machine.step(&event)?;
        check_digest(&event, &self.last_digest())?;
        for node in event.payload.new_nodes() {
            if node.created_by_event != event.id {
                return Err(ProtocolError::CorruptSession(format!(
                    "node {} not stamped with event {}",
                    node.id, event.id
                )));
            }
            let parent = node
                .parent
                .clone()
                .ok_or_else(|| DomainError::UnknownParent(node.id.clone()))?;
            self.tree.attach_in_place(&parent, node.clone())?;
        }
        match &event.payload {
            EventPayload::Init { .. } => unreachable!("rejected by the trace machine"),
            EventPayload::BlueprintSet { text } => {
                self.base_context = ResearchContext::new(
                    self.base_context.question.clone(),
                    self.base_context.survey.clone(),
                    Some(text.clone()),
                )?;
            }
            EventPayload::ExploreRound { parent, nodes, .. } => {
                if nodes.iter().any(|n| n.parent.as_ref() != Some(parent)) {
                    return Err(ProtocolError::CorruptSession(
                        "explore round node under a different parent".into(),
                    ));
                }
            }
            EventPayload::FeedbackApplied { node, prior, .. } => {
                if self.tree.node(node)?.text != *prior {
                    return Err(ProtocolError::CorruptSession(format!(
                        "feedback prior text differs from node {node}"
                    )));
                }
            }
            EventPayload::RefineRun {
                start, start_score, ..
            } => {
                if let Some(score) = start_score {
                    self.tree.set_scores(start, score.clone())?;
                }
            }
            EventPayload::SelfRanked { ranking } => {
                for entry in ranking {
                    if let Some(score) = &entry.scores {
                        self.tree.set_scores(&entry.node, score.clone())?;
                    }
                }
            }
            EventPayload::Routed { .. } => {}
        }
        if let Some(active) = self.machine.active() {
            self.tree.set_active(active)?;
        }
        self.events.push(event);
        Ok(())
    }

    fn last_digest(&self) -> String {
        self.events.last().map(|e| e.digest.clone()).unwrap_or_default()
    }

    pub fn session_id(&self) -> &SessionId {
        &self.session_id
    }

    pub fn base_context(&self) -> &ResearchContext {
        &self.base_context
    }

    pub fn corpus_ref(&self) -> &str {
        &self.corpus_ref
    }

    pub fn tree(&self) -> &SearchTree {
        &self.tree
    }

    pub fn events(&self) -> &[ProtocolEvent] {
        &self.events
    }

    pub fn stage_of_active(&self) -> Stage {
        self.machine.stage().unwrap_or(Stage::Exploratory)
    }

    /// Stage `node` will be treated as by the next engine call.
    pub fn effective_stage(&self, node: &NodeId) -> Result<Stage, ProtocolError> {
        self.machine
            .effective_stage(node)
            .ok_or_else(|| DomainError::UnknownNode(node.clone()).into())
    }

    /// Base context plus, in event order, every addition whose scope covers
    /// `node`: additions made at `node` itself, and additions made at a proper
    /// ancestor before `node` was created.
    pub fn context_for(&self, node: &NodeId) -> Result<ResearchContext, ProtocolError> {
        let target = self.tree.node(node)?;
        let mut context = self.base_context.clone();
        for event in &self.events {
            let (source, additions) = match &event.payload {
                EventPayload::FeedbackApplied {
                    node: source,
                    prior,
                    feedback,
                    ..
                } => (
                    source,
                    vec![
                        ContextAddition::prior_hypothesis(source.clone(), prior.clone())?,
                        ContextAddition::feedback(feedback.clone(), Some(source.clone()))?,
                    ],
                ),
                EventPayload::Routed {
                    node: source,
                    summary: Some(summary),
                    ..
                } => (
                    source,
                    vec![ContextAddition::prior_hypothesis(source.clone(), summary.clone())?],
                ),
                _ => continue,
            };
            let covers = source == node
                || (self.tree.is_proper_ancestor(source, node)
                    && target.created_by_event > event.id);
            if covers {
                context.additions.extend(additions);
            }
        }
        Ok(context)
    }

    pub fn base_inputs(&self) -> BaseInputs {
        BaseInputs {
            question: self.base_context.question.clone(),
            survey: self.base_context.survey.clone(),
            blueprint: self.base_context.blueprint.clone(),
            corpus_ref: self.corpus_ref.clone(),
        }
    }

    pub fn export(&self) -> SessionExport {
        SessionExport {
            session_id: self.session_id.clone(),
            base: self.base_inputs(),
            stage_of_active: self.stage_of_active(),
            events: self.events.clone(),
            tree: self.tree.clone(),
        }
    }
}

/// A live session: derived state plus the id source and the corpus it
/// explores. Operations either record exactly one event or change nothing,
/// except a failed refinement, which records its partial run.
#[derive(Clone, Debug)]
pub struct Session {
    state: SessionState,
    ids: IdGen,
    corpus: Arc<InspirationCorpus>,
}

impl Session {
    pub fn init(
        question: &str,
        survey: Option<String>,
        blueprint: Option<String>,
        corpus: Arc<InspirationCorpus>,
        ids: IdGen,
    ) -> Result<Self, ProtocolError> {
        let full = ResearchContext::new(question, survey, blueprint)?;
        corpus.validate()?;
        let session_id = ids.session_id();
        let (init_id, init_ts) = ids.event_id();
        let root = HypothesisNode::root(ids.node_id(), full.seed_text(), init_id.clone());
        let init = ProtocolEvent::new(
            init_id,
            init_ts,
            EventPayload::Init {
                question: full.question.clone(),
                survey: full.survey.clone(),
                corpus_ref: corpus.name.clone(),
                root,
            },
        )
        .sealed("");
        let state = SessionState::from_init(session_id, init)?;
        let mut session = Self { state, ids, corpus };
        if let Some(text) = full.blueprint {
            let signal = GuidingSignal::InitialBlueprint { text: text.clone() };
            signal.validate(None)?;
            session.commit(EventPayload::BlueprintSet { text })?;
        }
        Ok(session)
    }

    /// Replays an export and refuses it unless replay reproduces it exactly.
    pub fn restore(
        export: &SessionExport,
        corpus: Arc<InspirationCorpus>,
        ids: IdGen,
    ) -> Result<Self, ProtocolError> {
        let state = SessionState::replay(export.session_id.clone(), &export.events)
            .map_err(|e| match e {
                ProtocolError::CorruptSession(_) => e,
                other => ProtocolError::CorruptSession(other.to_string()),
            })?;
        if state.export() != *export {
            return Err(ProtocolError::CorruptSession(
                "replayed state differs from the stored export".into(),
            ));
        }
        if state.corpus_ref != corpus.name {
            return Err(ProtocolError::CorruptSession(format!(
                "session expects corpus {}, got {}",
                state.corpus_ref, corpus.name
            )));
        }
        ids.resume_after(export.session_id.as_str());
        for event in &state.events {
            ids.resume_after(event.id.as_str());
        }
        for node in state.tree.nodes() {
            ids.resume_after(node.id.as_str());
        }
        Ok(Self { state, ids, corpus })
    }

    pub fn restore_json(
        body: &str,
        corpus: Arc<InspirationCorpus>,
        ids: IdGen,
    ) -> Result<Self, ProtocolError> {
        let export: SessionExport = serde_json::from_str(body)
            .map_err(|e| ProtocolError::CorruptSession(format!("unreadable export: {e}")))?;
        Self::restore(&export, corpus, ids)
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn id(&self) -> &SessionId {
        self.state.session_id()
    }

    pub fn tree(&self) -> &SearchTree {
        self.state.tree()
    }

    pub fn events(&self) -> &[ProtocolEvent] {
        self.state.events()
    }

    pub fn corpus(&self) -> &Arc<InspirationCorpus> {
        &self.corpus
    }

    pub fn ids(&self) -> &IdGen {
        &self.ids
    }

    pub fn stage_of_active(&self) -> Stage {
        self.state.stage_of_active()
    }

    pub fn context_for(&self, node: &NodeId) -> Result<ResearchContext, ProtocolError> {
        self.state.context_for(node)
    }

    pub fn export(&self) -> SessionExport {
        self.state.export()
    }

    fn commit(&mut self, payload: EventPayload) -> Result<&ProtocolEvent, ProtocolError> {
        let (id, timestamp) = self.ids.event_id();
        self.commit_as(id, timestamp, payload)
    }

    fn commit_as(
        &mut self,
        id: EventId,
        timestamp: u64,
        payload: EventPayload,
    ) -> Result<&ProtocolEvent, ProtocolError> {
        let mut next = self.state.clone();
        let previous = next.last_digest();
        next.apply(ProtocolEvent::new(id, timestamp, payload).sealed(&previous))?;
        self.state = next;
        Ok(self.state.events.last().expect("just appended"))
    }

    pub fn apply_feedback(
        &mut self,
        node: &NodeId,
        feedback: &str,
    ) -> Result<&ProtocolEvent, ProtocolError> {
        self.apply_feedback_from(node, feedback, None)
    }

    pub fn apply_feedback_from(
        &mut self,
        node: &NodeId,
        feedback: &str,
        chooser: Option<Chooser>,
    ) -> Result<&ProtocolEvent, ProtocolError> {
        let signal = GuidingSignal::DirectionalFeedback {
            node: node.clone(),
            text: feedback.to_string(),
        };
        signal.validate(self.state.machine.effective_stage(node))?;
        let prior = self.tree().node(node)?.text.clone();
        self.commit(EventPayload::FeedbackApplied {
            node: node.clone(),
            prior,
            feedback: feedback.to_string(),
            chooser,
        })
    }

    pub fn route(&mut self, node: &NodeId, target: Stage) -> Result<&ProtocolEvent, ProtocolError> {
        self.route_from(node, target, None)
    }

    pub fn route_from(
        &mut self,
        node: &NodeId,
        target: Stage,
        chooser: Option<Chooser>,
    ) -> Result<&ProtocolEvent, ProtocolError> {
        let current = self.state.machine.effective_stage(node);
        GuidingSignal::RouteTransition {
            node: node.clone(),
            target,
        }
        .validate(current)?;
        let from = current.expect("validated");
        let summary = match target {
            Stage::FineGrained => Some(self.exploration_summary(node)?),
            Stage::Exploratory => None,
        };
        self.commit(EventPayload::Routed {
            node: node.clone(),
            from,
            target,
            summary,
            chooser,
        })
    }

    /// Inspirations along the root path followed by the routed node's text.
    fn exploration_summary(&self, node: &NodeId) -> Result<String, ProtocolError> {
        let path = self.tree().path_to_root(node)?;
        let mut lines = Vec::new();
        for step in &path {
            if let Some(insp) = &step.inspiration_used {
                let title = self
                    .corpus
                    .get(insp)
                    .map(|i| i.title.as_str())
                    .unwrap_or(insp.as_str());
                lines.push(format!("- step {}: {}", step.step_index, title));
            }
        }
        let text = &path.last().expect("path ends at node").text;
        Ok(if lines.is_empty() {
            format!("Selected hypothesis: {text}")
        } else {
            format!(
                "Inspirations used along the path:\n{}\nSelected hypothesis: {text}",
                lines.join("\n")
            )
        })
    }

    fn require_stage(&self, node: &NodeId, expected: Stage) -> Result<(), ProtocolError> {
        let actual = self.state.effective_stage(node)?;
        if actual != expected {
            return Err(ProtocolError::StageMismatch {
                node: node.clone(),
                expected,
                actual,
            });
        }
        Ok(())
    }

    /// One exploration round under `node`, which must be treated as exploratory.
    pub fn explore(
        &mut self,
        engine: &ExploratoryEngine<'_>,
        node: &NodeId,
    ) -> Result<&ProtocolEvent, ProtocolError> {
        self.require_stage(node, Stage::Exploratory)?;
        let context = self.context_for(node)?;
        let (id, timestamp) = self.ids.event_id();
        let mint = NodeMint::new(&self.ids, id.clone());
        let parent = self.tree().node(node)?;
        let round = engine.explore_round(
            self.tree(),
            &context,
            &self.corpus,
            Cursor::routed(parent, Stage::Exploratory),
            &mint,
        )?;
        let nodes = collect_nodes(&round.tree, &round.new_nodes);
        self.commit_as(
            id,
            timestamp,
            EventPayload::ExploreRound {
                parent: round.parent,
                selected: round.selected,
                nodes,
            },
        )
    }

    /// Hierarchical refinement from `node`, which must be treated as
    /// fine-grained. A run that fails part-way is still recorded (flagged
    /// incomplete) and the error is returned.
    pub fn refine(
        &mut self,
        engine: &RefinementEngine<'_>,
        node: &NodeId,
    ) -> Result<&ProtocolEvent, ProtocolError> {
        self.require_stage(node, Stage::FineGrained)?;
        let context = self.context_for(node)?;
        let (id, timestamp) = self.ids.event_id();
        let mint = NodeMint::new(&self.ids, id.clone());
        let start = self.tree().node(node)?;
        let (run, error) = match engine.refine_hierarchical(
            self.tree(),
            &context,
            Cursor::routed(start, Stage::FineGrained),
            &mint,
        ) {
            Ok(run) => (run, None),
            Err(failure) => (*failure.partial, Some(failure.error)),
        };
        let payload = EventPayload::RefineRun {
            start: node.clone(),
            start_score: run.start_score,
            nodes: collect_nodes(&run.tree, &run.accepted),
            outcome: run.outcome,
            log: run.log,
            complete: error.is_none(),
            error: error.as_ref().map(ToString::to_string),
        };
        self.commit_as(id, timestamp, payload)?;
        match error {
            None => Ok(self.events().last().expect("just recorded")),
            Some(e) => Err(ProtocolError::RefineIncomplete(e)),
        }
    }

    /// Scores candidates and orders them by average, best first; unscorable
    /// candidates sort last. Ties and unscored entries order by node id.
    pub fn self_rank(
        &mut self,
        scorer: &Scorer<'_>,
        candidates: &[NodeId],
    ) -> Result<Vec<RankEntry>, ProtocolError> {
        if candidates.is_empty() {
            return Err(ProtocolError::EmptyCandidates);
        }
        let mut unique: Vec<&NodeId> = Vec::new();
        for id in candidates {
            self.tree().node(id)?;
            if !unique.contains(&id) {
                unique.push(id);
            }
        }
        let mut ranking = Vec::with_capacity(unique.len());
        for id in unique {
            let context = self.context_for(id)?;
            let text = &self.tree().node(id)?.text;
            let scores = match scorer.score_hypothesis(&context, text) {
                Ok(score) => Some(score),
                Err(RefineError::ScoreUnavailable { .. } | RefineError::EmptyHypothesis) => None,
                Err(e) => return Err(ProtocolError::Scoring(e)),
            };
            ranking.push(RankEntry {
                node: id.clone(),
                scores,
            });
        }
        sort_ranking(&mut ranking);
        self.commit(EventPayload::SelfRanked {
            ranking: ranking.clone(),
        })?;
        Ok(ranking)
    }
}

fn check_digest(event: &ProtocolEvent, previous: &str) -> Result<(), ProtocolError> {
    if event.digest != event.chain_digest(previous) {
        return Err(ProtocolError::CorruptSession(format!(
            "digest mismatch at event {}",
            event.id
        )));
    }
    Ok(())
}

fn collect_nodes(tree: &SearchTree, ids: &[NodeId]) -> Vec<HypothesisNode> {
    ids.iter()
        .map(|id| tree.get(id).expect("engine returned attached node").clone())
        .collect()
}

/// Average descending, unscored last, ties by node id.
pub fn sort_ranking(ranking: &mut [RankEntry]) {
    ranking.sort_by(|a, b| match (a.average(), b.average()) {
        (Some(x), Some(y)) => y.total_cmp(&x).then_with(|| a.node.cmp(&b.node)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.node.cmp(&b.node),
    });
}
