//! The per-session hypothesis search tree.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use super::context::ResearchContext;
use super::error::DomainError;
use super::ids::{EventId, NodeId};
use super::node::{child_step_index, EvaluationScore, HypothesisNode, Stage};

/// Canonical export document: every node once, sorted by id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeExport {
    pub root: NodeId,
    pub active: NodeId,
    pub nodes: Vec<HypothesisNode>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "TreeExport", try_from = "TreeExport")]
pub struct SearchTree {
    root: NodeId,
    nodes: BTreeMap<NodeId, HypothesisNode>,
    active: NodeId,
}

impl SearchTree {
    /// Creates a one-node tree whose root renders `background`.
    pub fn new(
        background: &ResearchContext,
        root_id: NodeId,
        created_by: EventId,
    ) -> Result<Self, DomainError> {
        background.validate()?;
        let root = HypothesisNode::root(root_id.clone(), background.seed_text(), created_by);
        Ok(Self::from_root(root))
    }

    pub(crate) fn from_root(root: HypothesisNode) -> Self {
        let id = root.id.clone();
        let mut nodes = BTreeMap::new();
        nodes.insert(id.clone(), root);
        Self {
            root: id.clone(),
            nodes,
            active: id,
        }
    }

    pub fn root(&self) -> &HypothesisNode {
        &self.nodes[&self.root]
    }

    pub fn root_id(&self) -> &NodeId {
        &self.root
    }

    pub fn active(&self) -> &HypothesisNode {
        &self.nodes[&self.active]
    }

    pub fn active_id(&self) -> &NodeId {
        &self.active
    }

    pub fn get(&self, id: &NodeId) -> Option<&HypothesisNode> {
        self.nodes.get(id)
    }

    pub fn node(&self, id: &NodeId) -> Result<&HypothesisNode, DomainError> {
        self.nodes
            .get(id)
            .ok_or_else(|| DomainError::UnknownNode(id.clone()))
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        self.nodes.contains_key(id)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes in id order (creation order).
    pub fn nodes(&self) -> impl Iterator<Item = &HypothesisNode> {
        self.nodes.values()
    }

    /// Returns a new tree with `node` attached under `parent`.
    pub fn attach_child(&self, parent: &NodeId, node: HypothesisNode) -> Result<Self, DomainError> {
        let mut next = self.clone();
        next.attach_in_place(parent, node)?;
        Ok(next)
    }

    pub(crate) fn attach_in_place(
        &mut self,
        parent: &NodeId,
        mut node: HypothesisNode,
    ) -> Result<(), DomainError> {
        let parent_node = self
            .nodes
            .get(parent)
            .ok_or_else(|| DomainError::UnknownParent(parent.clone()))?;
        if self.nodes.contains_key(&node.id) {
            return Err(DomainError::DuplicateNode(node.id));
        }
        node.parent = Some(parent.clone());
        if !node.stage_fields_consistent() {
            return Err(DomainError::StageFieldViolation(node.id));
        }
        let expected = child_step_index(parent_node, node.stage);
        if node.step_index != expected {
            return Err(DomainError::StepIndexViolation {
                expected,
                got: node.step_index,
            });
        }
        self.nodes.insert(node.id.clone(), node);
        Ok(())
    }

    pub fn with_active(&self, id: &NodeId) -> Result<Self, DomainError> {
        let mut next = self.clone();
        next.set_active(id)?;
        Ok(next)
    }

    pub(crate) fn set_active(&mut self, id: &NodeId) -> Result<(), DomainError> {
        if !self.nodes.contains_key(id) {
            return Err(DomainError::UnknownNode(id.clone()));
        }
        self.active = id.clone();
        Ok(())
    }

    pub(crate) fn set_scores(
        &mut self,
        id: &NodeId,
        scores: EvaluationScore,
    ) -> Result<(), DomainError> {
        let node = self
            .nodes
            .get_mut(id)
            .ok_or_else(|| DomainError::UnknownNode(id.clone()))?;
        node.scores = Some(scores);
        Ok(())
    }

    /// Root-first chain ending at `id`.
    pub fn path_to_root(&self, id: &NodeId) -> Result<Vec<&HypothesisNode>, DomainError> {
        let mut path = Vec::new();
        let mut cursor = Some(self.node(id)?);
        while let Some(node) = cursor {
            path.push(node);
            cursor = node.parent.as_ref().and_then(|p| self.nodes.get(p));
        }
        path.reverse();
        Ok(path)
    }

    pub fn children(&self, id: &NodeId) -> Vec<&HypothesisNode> {
        self.nodes
            .values()
            .filter(|n| n.parent.as_ref() == Some(id))
            .collect()
    }

    /// Nodes with no children, in id order.
    pub fn leaves(&self) -> Vec<&HypothesisNode> {
        let parents: HashSet<&NodeId> = self.nodes.values().filter_map(|n| n.parent.as_ref()).collect();
        self.nodes
            .values()
            .filter(|n| !parents.contains(&n.id))
            .collect()
    }

    /// True when `ancestor` lies strictly above `node`.
    pub fn is_proper_ancestor(&self, ancestor: &NodeId, node: &NodeId) -> bool {
        let mut cursor = self.nodes.get(node).and_then(|n| n.parent.as_ref());
        while let Some(id) = cursor {
            if id == ancestor {
                return true;
            }
            cursor = self.nodes.get(id).and_then(|n| n.parent.as_ref());
        }
        false
    }

    pub fn export(&self) -> TreeExport {
        self.clone().into()
    }

    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(&self.export()).expect("tree export serializes")
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        let roots: Vec<_> = self.nodes.values().filter(|n| n.is_root()).collect();
        if roots.len() != 1 || roots[0].id != self.root {
            return Err(DomainError::InvalidTree("expected exactly one root".into()));
        }
        if roots[0].step_index != 0 || roots[0].stage != Stage::Exploratory {
            return Err(DomainError::InvalidTree(
                "root must be exploratory at step 0".into(),
            ));
        }
        if !self.nodes.contains_key(&self.active) {
            return Err(DomainError::InvalidTree("active node missing".into()));
        }
        for node in self.nodes.values() {
            let Some(parent) = &node.parent else { continue };
            let parent_node = self
                .nodes
                .get(parent)
                .ok_or_else(|| DomainError::UnknownParent(parent.clone()))?;
            if !node.stage_fields_consistent() {
                return Err(DomainError::StageFieldViolation(node.id.clone()));
            }
            let expected = child_step_index(parent_node, node.stage);
            if node.step_index != expected {
                return Err(DomainError::StepIndexViolation {
                    expected,
                    got: node.step_index,
                });
            }
        }
        // Every walk upward must reach the root within |nodes| hops.
        for start in self.nodes.keys() {
            let mut hops = 0;
            let mut cursor = self.nodes[start].parent.as_ref();
            while let Some(id) = cursor {
                hops += 1;
                if hops > self.nodes.len() {
                    return Err(DomainError::InvalidTree("cycle in parent links".into()));
                }
                cursor = self.nodes[id].parent.as_ref();
            }
        }
        Ok(())
    }
}

impl From<SearchTree> for TreeExport {
    fn from(tree: SearchTree) -> Self {
        TreeExport {
            root: tree.root,
            active: tree.active,
            nodes: tree.nodes.into_values().collect(),
        }
    }
}

impl TryFrom<TreeExport> for SearchTree {
    type Error = DomainError;

    fn try_from(export: TreeExport) -> Result<Self, Self::Error> {
        let mut nodes = BTreeMap::new();
        for node in export.nodes {
            if let Some(previous) = nodes.insert(node.id.clone(), node) {
                return Err(DomainError::DuplicateNode(previous.id));
            }
        }
        let tree = SearchTree {
            root: export.root,
            nodes,
            active: export.active,
        };
        tree.validate()?;
        Ok(tree)
    }
}
