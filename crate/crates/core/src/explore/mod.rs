//! Exploratory stage: pick inspirations for the current hypothesis and
//! expand one child per inspiration.
//!
//! One call to [`ExploratoryEngine::explore_round`] performs exactly one
//! round; deciding which node to expand next belongs to the caller.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::domain::{
    Cursor, DomainError, HypothesisNode, Inspiration, InspirationCorpus, InspirationId, NodeId,
    NodeMint, ResearchContext, SearchTree, Stage,
};
use crate::llm::{field_or_raw, Gateway, GatewayError, GenerationRequest, TemplateId};
use crate::text::content_tokens;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExploreConfig {
    /// Inspirations selected (children created) per round.
    pub beam_width: usize,
    /// Candidates the selector sees after lexical pre-filtering.
    pub shortlist_size: usize,
    /// Upper bound on rounds in one autonomous exploration run.
    pub max_rounds: usize,
}

impl Default for ExploreConfig {
    fn default() -> Self {
        Self {
            beam_width: 3,
            shortlist_size: 15,
            max_rounds: 4,
        }
    }
}

impl ExploreConfig {
    pub fn validate(&self) -> Result<(), ExploreError> {
        if self.beam_width == 0 || self.shortlist_size == 0 || self.max_rounds == 0 {
            return Err(ExploreError::InvalidConfig(
                "beam_width, shortlist_size and max_rounds must be positive".into(),
            ));
        }
        Ok(())
    }

    /// `(beam, shortlist)` clamped so that `beam <= shortlist <= available`.
    pub fn clamped(&self, available: usize) -> (usize, usize) {
        let shortlist = self.shortlist_size.max(self.beam_width).min(available);
        (self.beam_width.min(shortlist), shortlist)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExploreError {
    #[error("inspiration corpus is empty")]
    EmptyCorpus,
    #[error("every inspiration has already been used under node {0}")]
    InspirationsExhausted(NodeId),
    #[error("selector named no valid inspiration: {raw}")]
    SelectionParseFailure { raw: String },
    #[error("node {node} is treated as {stage}, expected exploratory")]
    StageMismatch { node: NodeId, stage: Stage },
    #[error("unknown inspiration {0}")]
    UnknownInspiration(InspirationId),
    #[error("invalid explore config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Domain(#[from] DomainError),
}

/// Result of one exploration round.
#[derive(Clone, Debug)]
pub struct RoundOutput {
    pub tree: SearchTree,
    pub parent: NodeId,
    pub selected: Vec<InspirationId>,
    pub new_nodes: Vec<NodeId>,
}

pub struct ExploratoryEngine<'g> {
    gateway: &'g Gateway,
    config: ExploreConfig,
}

impl<'g> ExploratoryEngine<'g> {
    pub fn new(gateway: &'g Gateway, config: ExploreConfig) -> Self {
        Self { gateway, config }
    }

    pub fn config(&self) -> &ExploreConfig {
        &self.config
    }

    /// Deterministic lexical pre-filter: token overlap between question plus
    /// current hypothesis and title plus abstract, ties by id.
    pub fn shortlist<'c>(
        &self,
        context: &ResearchContext,
        current: &HypothesisNode,
        corpus: &'c InspirationCorpus,
        exclude: &HashSet<InspirationId>,
    ) -> Vec<&'c Inspiration> {
        let available: Vec<&Inspiration> = corpus
            .entries
            .iter()
            .filter(|e| !exclude.contains(&e.id))
            .collect();
        let (_, size) = self.config.clamped(available.len());
        if available.len() <= size {
            return available;
        }
        let query = content_tokens(&format!("{} {}", context.question, current.text));
        let mut scored: Vec<(usize, &Inspiration)> = available
            .into_iter()
            .map(|insp| {
                let doc = content_tokens(&format!("{} {}", insp.title, insp.abstract_text));
                (query.intersection(&doc).count(), insp)
            })
            .collect();
        scored.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.id.cmp(&b.1.id)));
        scored.into_iter().take(size).map(|(_, i)| i).collect()
    }

    /// Picks up to `beam_width` distinct inspirations, best first.
    pub fn select_inspirations(
        &self,
        context: &ResearchContext,
        current: &HypothesisNode,
        corpus: &InspirationCorpus,
    ) -> Result<Vec<InspirationId>, ExploreError> {
        self.select_excluding(context, current, corpus, &HashSet::new())
    }

    fn select_excluding(
        &self,
        context: &ResearchContext,
        current: &HypothesisNode,
        corpus: &InspirationCorpus,
        exclude: &HashSet<InspirationId>,
    ) -> Result<Vec<InspirationId>, ExploreError> {
        self.config.validate()?;
        if corpus.is_empty() {
            return Err(ExploreError::EmptyCorpus);
        }
        let candidates = self.shortlist(context, current, corpus, exclude);
        if candidates.is_empty() {
            return Err(ExploreError::InspirationsExhausted(current.id.clone()));
        }
        let (beam, _) = self.config.clamped(candidates.len());
        if candidates.len() <= beam {
            return Ok(candidates.into_iter().map(|c| c.id.clone()).collect());
        }

        let listing: Vec<String> = candidates
            .iter()
            .map(|c| format!("{}: {} -- {}", c.id, c.title, c.abstract_text))
            .collect();
        let request = GenerationRequest::new(TemplateId::SelectInspiration)
            .var("background", context.render())
            .var("hypothesis", &current.text)
            .var("candidates", listing.join("\n"))
            .var("beam_width", beam.to_string());
        let valid: HashSet<&InspirationId> = candidates.iter().map(|c| &c.id).collect();
        let picked = self
            .gateway
            .complete_with(&request, &["inspirations"], |fields| {
                let mut picked: Vec<InspirationId> = Vec::new();
                for raw in fields["inspirations"].split(|c: char| c == ',' || c.is_whitespace()) {
                    let id = InspirationId::from(
                        raw.trim_matches(|c: char| "\"'[]()`".contains(c)),
                    );
                    if valid.contains(&id) && !picked.contains(&id) {
                        picked.push(id);
                    }
                }
                if picked.is_empty() {
                    Err("named no valid candidate id".to_string())
                } else {
                    Ok(picked)
                }
            })
            .map_err(|e| match e {
                GatewayError::ParseFailure { raw, .. } => ExploreError::SelectionParseFailure { raw },
                other => other.into(),
            })?;
        Ok(picked.into_iter().take(beam).collect())
    }

    /// One hypothesis update: `parent` plus `inspiration` gives a new child.
    /// The child is returned unattached.
    pub fn expand_with_inspiration(
        &self,
        context: &ResearchContext,
        parent: Cursor<'_>,
        inspiration: &Inspiration,
        mint: &NodeMint<'_>,
    ) -> Result<HypothesisNode, ExploreError> {
        if parent.stage != Stage::Exploratory {
            return Err(ExploreError::StageMismatch {
                node: parent.node.id.clone(),
                stage: parent.stage,
            });
        }
        let request = GenerationRequest::new(TemplateId::GenerateHypothesis)
            .var("background", context.render())
            .var("hypothesis", &parent.node.text)
            .var("inspiration_title", &inspiration.title)
            .var("inspiration_abstract", &inspiration.abstract_text);
        let reply = self.gateway.complete(&request)?;
        Ok(HypothesisNode::exploratory(
            mint.next_id(),
            parent.node,
            field_or_raw(&reply.text, "hypothesis"),
            inspiration.id.clone(),
            mint.event().clone(),
        ))
    }

    /// Selects inspirations for `parent` and attaches one child per selection.
    ///
    /// Inspirations already used by an existing child of `parent` are skipped.
    /// The tree's active node is left unchanged.
    pub fn explore_round(
        &self,
        tree: &SearchTree,
        context: &ResearchContext,
        corpus: &InspirationCorpus,
        parent: Cursor<'_>,
        mint: &NodeMint<'_>,
    ) -> Result<RoundOutput, ExploreError> {
        if parent.stage != Stage::Exploratory {
            return Err(ExploreError::StageMismatch {
                node: parent.node.id.clone(),
                stage: parent.stage,
            });
        }
        let used: HashSet<InspirationId> = tree
            .children(&parent.node.id)
            .into_iter()
            .filter_map(|c| c.inspiration_used.clone())
            .collect();
        let selected = self.select_excluding(context, parent.node, corpus, &used)?;

        let mut next = tree.clone();
        let mut new_nodes = Vec::with_capacity(selected.len());
        for id in &selected {
            let inspiration = corpus
                .get(id)
                .ok_or_else(|| ExploreError::UnknownInspiration(id.clone()))?;
            let child = self.expand_with_inspiration(context, parent, inspiration, mint)?;
            new_nodes.push(child.id.clone());
            next.attach_in_place(&parent.node.id, child)?;
        }
        Ok(RoundOutput {
            tree: next,
            parent: parent.node.id.clone(),
            selected,
            new_nodes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::IdGen;
    use crate::llm::{Script, ScriptedBackend};
    use std::sync::Arc;

    fn corpus(n: usize) -> InspirationCorpus {
        InspirationCorpus::new(
            "test",
            (1..=n)
                .map(|i| Inspiration {
                    id: format!("i{i}").into(),
                    title: format!("Paper {i}"),
                    abstract_text: format!("abstract {i}"),
                })
                .collect(),
        )
        .unwrap()
    }

    fn setup() -> (ResearchContext, SearchTree, IdGen) {
        let ctx = ResearchContext::new("Q", None, None).unwrap();
        let ids = IdGen::deterministic(0);
        let (event, _) = ids.event_id();
        let tree = SearchTree::new(&ctx, ids.node_id(), event).unwrap();
        (ctx, tree, ids)
    }

    fn cfg(beam: usize) -> ExploreConfig {
        ExploreConfig {
            beam_width: beam,
            ..ExploreConfig::default()
        }
    }

    #[test]
    fn single_entry_corpus_needs_no_model_call() {
        let (ctx, tree, _) = setup();
        let gw = Gateway::new(Arc::new(ScriptedBackend::sequence(Vec::<String>::new())));
        let engine = ExploratoryEngine::new(&gw, cfg(3));
        let picked = engine.select_inspirations(&ctx, tree.root(), &corpus(1)).unwrap();
        assert_eq!(picked, vec![InspirationId::from("i1")]);
        assert_eq!(gw.calls(), 0);
    }

    #[test]
    fn duplicate_selections_dropped_in_order() {
        let (ctx, tree, _) = setup();
        let gw = Gateway::new(Arc::new(ScriptedBackend::sequence([
            "«inspirations»i7, i2, i7«/inspirations»",
        ])));
        let engine = ExploratoryEngine::new(&gw, cfg(2));
        let picked = engine.select_inspirations(&ctx, tree.root(), &corpus(8)).unwrap();
        assert_eq!(picked, vec![InspirationId::from("i7"), InspirationId::from("i2")]);
    }

    #[test]
    fn unknown_ids_fail_after_two_repairs() {
        let (ctx, tree, _) = setup();
        let gw = Gateway::new(Arc::new(ScriptedBackend::sequence([
            "«inspirations»x1«/inspirations»",
            "«inspirations»x2«/inspirations»",
            "«inspirations»x3«/inspirations»",
        ])));
        let engine = ExploratoryEngine::new(&gw, cfg(2));
        let err = engine
            .select_inspirations(&ctx, tree.root(), &corpus(5))
            .unwrap_err();
        assert!(matches!(err, ExploreError::SelectionParseFailure { .. }));
        assert_eq!(gw.calls(), 3);
    }

    #[test]
    fn empty_corpus_rejected() {
        let (ctx, tree, _) = setup();
        let gw = Gateway::new(Arc::new(ScriptedBackend::sequence(["x"])));
        let engine = ExploratoryEngine::new(&gw, cfg(2));
        let empty = InspirationCorpus {
            name: "e".into(),
            entries: vec![],
        };
        assert_eq!(
            engine.select_inspirations(&ctx, tree.root(), &empty),
            Err(ExploreError::EmptyCorpus)
        );
    }

    #[test]
    fn expansion_uses_generator_text() {
        let (ctx, tree, ids) = setup();
        let gw = Gateway::new(Arc::new(ScriptedBackend::sequence(["H-new"])));
        let engine = ExploratoryEngine::new(&gw, cfg(1));
        let c = corpus(2);
        let mint = NodeMint::new(&ids, ids.event_id().0);
        let child = engine
            .expand_with_inspiration(&ctx, Cursor::at(tree.root()), &c.entries[0], &mint)
            .unwrap();
        assert_eq!(child.text, "H-new");
        assert_eq!(child.step_index, 1);
        assert_eq!(child.inspiration_used, Some("i1".into()));
        assert_eq!(tree.len(), 1, "child is not attached");
    }

    #[test]
    fn fine_grained_parent_is_stage_mismatch() {
        let (ctx, tree, ids) = setup();
        let gw = Gateway::new(Arc::new(ScriptedBackend::sequence(["H"])));
        let engine = ExploratoryEngine::new(&gw, cfg(1));
        let fine = HypothesisNode::fine_grained(
            ids.node_id(),
            tree.root(),
            "r".into(),
            0,
            None,
            "e".into(),
        );
        let mint = NodeMint::new(&ids, ids.event_id().0);
        let err = engine
            .expand_with_inspiration(&ctx, Cursor::at(&fine), &corpus(1).entries[0], &mint)
            .unwrap_err();
        assert!(matches!(err, ExploreError::StageMismatch { .. }));
    }

    #[test]
    fn round_attaches_beam_children_under_parent() {
        let (ctx, tree, ids) = setup();
        let mut script = Script::new();
        script.push(TemplateId::SelectInspiration, "«inspirations»i3, i1, i4«/inspirations»");
        script.push_repeated(TemplateId::GenerateHypothesis, "«hypothesis»child«/hypothesis»", 3);
        let gw = Gateway::new(Arc::new(script.build()));
        let engine = ExploratoryEngine::new(&gw, cfg(3));
        let mint = NodeMint::new(&ids, ids.event_id().0);
        let out = engine
            .explore_round(&tree, &ctx, &corpus(5), Cursor::at(tree.root()), &mint)
            .unwrap();
        assert_eq!(out.tree.len(), 4);
        assert_eq!(out.new_nodes.len(), 3);
        assert_eq!(out.tree.children(tree.root_id()).len(), 3);
        assert_eq!(out.tree.active_id(), tree.root_id());
        let used: Vec<_> = out
            .new_nodes
            .iter()
            .map(|id| out.tree.get(id).unwrap().inspiration_used.clone().unwrap())
            .collect();
        assert_eq!(used, out.selected);
    }

    #[test]
    fn small_corpus_clamps_beam() {
        let (ctx, tree, ids) = setup();
        let gw = Gateway::new(Arc::new(ScriptedBackend::sequence(["a", "b"])));
        let engine = ExploratoryEngine::new(&gw, cfg(3));
        let mint = NodeMint::new(&ids, ids.event_id().0);
        let out = engine
            .explore_round(&tree, &ctx, &corpus(2), Cursor::at(tree.root()), &mint)
            .unwrap();
        assert_eq!(out.new_nodes.len(), 2);
    }

    #[test]
    fn reexpanding_skips_used_inspirations() {
        let (ctx, tree, ids) = setup();
        let c = corpus(3);
        let mint = NodeMint::new(&ids, ids.event_id().0);
        let gw = Gateway::new(Arc::new(
            Script::new()
                .reply(TemplateId::SelectInspiration, "«inspirations»i1, i2«/inspirations»")
                .reply(TemplateId::GenerateHypothesis, "a")
                .reply(TemplateId::GenerateHypothesis, "b")
                .reply(TemplateId::GenerateHypothesis, "c")
                .build(),
        ));
        let engine = ExploratoryEngine::new(&gw, cfg(2));
        let first = engine
            .explore_round(&tree, &ctx, &c, Cursor::at(tree.root()), &mint)
            .unwrap();
        let second = engine
            .explore_round(&first.tree, &ctx, &c, Cursor::at(first.tree.root()), &mint)
            .unwrap();
        assert_eq!(second.selected, vec![InspirationId::from("i3")]);
        let third = engine.explore_round(&second.tree, &ctx, &c, Cursor::at(second.tree.root()), &mint);
        assert!(matches!(third, Err(ExploreError::InspirationsExhausted(_))));
    }

    #[test]
    fn shortlist_prefers_lexical_overlap() {
        let (ctx, tree, _) = setup();
        let gw = Gateway::new(Arc::new(ScriptedBackend::sequence(Vec::<String>::new())));
        let engine = ExploratoryEngine::new(
            &gw,
            ExploreConfig {
                beam_width: 1,
                shortlist_size: 2,
                max_rounds: 1,
            },
        );
        let ctx = ResearchContext {
            question: "perovskite solar stability".into(),
            ..ctx
        };
        let c = InspirationCorpus::new(
            "c",
            vec![
                Inspiration { id: "a".into(), title: "Enzymes".into(), abstract_text: "proteins".into() },
                Inspiration { id: "b".into(), title: "Perovskite films".into(), abstract_text: "stability under humidity".into() },
                Inspiration { id: "c".into(), title: "Solar perovskite".into(), abstract_text: "efficiency".into() },
                Inspiration { id: "d".into(), title: "Batteries".into(), abstract_text: "lithium".into() },
            ],
        )
        .unwrap();
        let ids: Vec<&str> = engine
            .shortlist(&ctx, tree.root(), &c, &HashSet::new())
            .iter()
            .map(|i| i.id.as_str())
            .collect();
        assert_eq!(ids, ["b", "c"]);
    }
}
