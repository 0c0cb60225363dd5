//! Beam width one for five rounds gives a linear chain of inspirations.

use std::sync::Arc;

use moose_core::domain::IdGen;
use moose_core::explore::{ExploreConfig, ExploratoryEngine};
use moose_core::llm::{render_field, Gateway, Script, TemplateId};
use moose_core::protocol::Session;

use super::common;
use crate::ensure;

const ROUNDS: usize = 5;

pub fn check() -> Result<String, String> {
    let mut script = Script::new();
    for k in 1..=ROUNDS {
        script
            .push(TemplateId::SelectInspiration, render_field("inspirations", &format!("p{k}")))
            .push(TemplateId::GenerateHypothesis, render_field("hypothesis", &format!("hypothesis after step {k}")));
    }
    let gateway = Gateway::new(Arc::new(script.build()));
    let engine = ExploratoryEngine::new(&gateway, ExploreConfig { beam_width: 1, ..ExploreConfig::default() });
    let mut session = Session::init("How can amination be greener?", None, None, common::corpus(), IdGen::deterministic(5))
        .map_err(|e| e.to_string())?;
    let mut tip = session.tree().root_id().clone();
    for _ in 0..ROUNDS {
        let event = session.explore(&engine, &tip).map_err(|e| e.to_string())?;
        let nodes = event.payload.new_nodes();
        ensure!(nodes.len() == 1, "round produced {} nodes", nodes.len());
        tip = nodes[0].id.clone();
    }
    let tree = session.tree();
    ensure!(tree.len() == ROUNDS + 1, "tree has {} nodes", tree.len());
    let path = tree.path_to_root(&tip).map_err(|e| e.to_string())?;
    ensure!(path.len() == ROUNDS + 1, "path has {} nodes", path.len());
    ensure!(path[0].id == *tree.root_id(), "path does not start at the root");
    let mut edges = 0;
    for (k, pair) in path.windows(2).enumerate() {
        let (parent, child) = (pair[0], pair[1]);
        ensure!(child.parent.as_ref() == Some(&parent.id), "broken parent link at step {}", k + 1);
        ensure!(child.step_index as usize == k + 1, "step index {} at depth {}", child.step_index, k + 1);
        let expected = format!("p{}", k + 1);
        ensure!(
            child.inspiration_used.as_ref().map(|i| i.as_str()) == Some(expected.as_str()),
            "edge {} labeled {:?}",
            k + 1,
            child.inspiration_used
        );
        ensure!(child.text == format!("hypothesis after step {}", k + 1), "unexpected text at step {}", k + 1);
        edges += 1;
    }
    ensure!(tree.leaves().len() == 1, "chain is not linear");
    Ok(format!("{edges} inspiration-labeled edges p1..p{ROUNDS}; path_to_root covers all {} nodes", path.len()))
}
