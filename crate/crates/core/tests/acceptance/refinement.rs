//! Patience rule on a fixed reward sequence, and strict level ordering over
//! randomized scripted landscapes.

use std::sync::Arc;

use moose_core::domain::{Cursor, IdGen, NodeId, NodeMint, ResearchContext, SearchTree, Stage};
use moose_core::llm::{render_field, Gateway, Script, TemplateId};
use moose_core::protocol::{EventPayload, ProtocolError, Session};
use moose_core::refine::{RefineConfig, RefinementEngine, RunLogRecord, Scorer};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::common;
use super::support::score_reply;
use crate::ensure;

const RUNS: u64 = 200;

fn five_seven_seven_seven() -> Result<String, String> {
    let mut script = Script::new();
    script.push(TemplateId::ScoreHypothesis, score_reply(5.0));
    for (i, reward) in [5.0, 7.0, 7.0, 7.0].into_iter().enumerate() {
        script.push(TemplateId::ProposeRefinement, render_field("hypothesis", &format!("candidate {i}")));
        script.push(TemplateId::ScoreHypothesis, score_reply(reward));
    }
    let gateway = Gateway::new(Arc::new(script.build()));
    let config = RefineConfig { levels: vec!["only level".into()], proposals_per_step: 1, patience: 2, max_steps_per_level: 20 };
    let engine = RefinementEngine::new(&gateway, Scorer::with_default_criteria(&gateway), config);
    let ctx = ResearchContext::new("q?", None, None).map_err(|e| e.to_string())?;
    let ids = IdGen::deterministic(0);
    let tree = SearchTree::new(&ctx, ids.node_id(), ids.event_id().0).map_err(|e| e.to_string())?;
    let mint = NodeMint::new(&ids, ids.event_id().0);
    let out = engine
        .refine_level(&tree, &ctx, Cursor::routed(tree.root(), Stage::FineGrained), 0, &mint)
        .map_err(|e| e.to_string())?;
    ensure!(out.steps == 4, "stopped after {} steps", out.steps);
    ensure!(out.best_score.average() == 7.0, "best average {}", out.best_score.average());
    Ok(format!("[5,7,7,7] stops at {} steps with best {}", out.steps, out.best_score.average()))
}

/// Checks one level's records against the patience rule: the level stops
/// the first time `patience` iterations pass without improvement, or at the
/// iteration cap.
fn level_converged(records: &[&RunLogRecord], config: &RefineConfig) -> Result<(), String> {
    let chunks: Vec<bool> = records
        .chunks(config.proposals_per_step)
        .map(|c| c.iter().any(|r| r.accepted))
        .collect();
    let mut stale = 0;
    for (i, improved) in chunks.iter().enumerate() {
        stale = if *improved { 0 } else { stale + 1 };
        if stale >= config.patience {
            ensure!(i + 1 == chunks.len(), "level kept going after converging at iteration {}", i + 1);
            return Ok(());
        }
    }
    ensure!(chunks.len() == config.max_steps_per_level, "level stopped after {} iterations without converging", chunks.len());
    Ok(())
}

fn randomized(seed: u64) -> Result<(), String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let config = RefineConfig {
        levels: (0..rng.random_range(2..4)).map(|l| format!("level {l}")).collect(),
        proposals_per_step: rng.random_range(1..4),
        patience: rng.random_range(1..4),
        max_steps_per_level: rng.random_range(3..9),
    };
    let mut script = Script::new();
    script.push(TemplateId::ScoreHypothesis, score_reply(rng.random_range(0..6) as f64));
    for i in 0..120 {
        script.push(TemplateId::ProposeRefinement, render_field("hypothesis", &format!("candidate {i}")));
        script.push(TemplateId::ScoreHypothesis, score_reply(rng.random_range(0..=10) as f64));
    }
    let gateway = Gateway::new(Arc::new(script.build()));
    let engine = RefinementEngine::new(&gateway, Scorer::with_default_criteria(&gateway), config.clone());
    let mut session = Session::init("q?", None, None, common::corpus(), IdGen::deterministic(seed)).map_err(|e| e.to_string())?;
    let root = session.tree().root_id().clone();
    session.route(&root, Stage::FineGrained).map_err(|e| e.to_string())?;
    match session.refine(&engine, &root) {
        Ok(_) | Err(ProtocolError::RefineIncomplete(_)) => {}
        Err(e) => return Err(e.to_string()),
    }
    let event = session.events().last().unwrap();
    let EventPayload::RefineRun { log, outcome, complete, nodes, .. } = &event.payload else {
        return Err("no refine event".into());
    };
    ensure!(*complete, "seed {seed}: run incomplete");
    ensure!(log.windows(2).all(|w| w[0].level <= w[1].level), "seed {seed}: levels interleave");
    ensure!(log.iter().enumerate().all(|(i, r)| r.step == i + 1), "seed {seed}: step numbering");
    let mut seed_node: NodeId = root.clone();
    for level in 0..config.levels.len() {
        let records: Vec<&RunLogRecord> = log.iter().filter(|r| r.level == level).collect();
        ensure!(!records.is_empty(), "seed {seed}: level {level} never ran");
        level_converged(&records, &config).map_err(|e| format!("seed {seed} level {level}: {e}"))?;
        let level_nodes: Vec<_> = nodes.iter().filter(|n| n.abstraction_level == Some(level as u32)).collect();
        if let Some(first) = level_nodes.first() {
            ensure!(first.parent.as_ref() == Some(&seed_node), "seed {seed}: level {level} did not start from the previous best");
        }
        if let Some(last) = level_nodes.last() {
            seed_node = last.id.clone();
        }
        ensure!(outcome.per_level_trace[level].steps == records.len(), "seed {seed}: trace steps differ from log");
    }
    ensure!(outcome.final_node == seed_node, "seed {seed}: final node is not the last level's best");
    ensure!(outcome.steps_used == log.len(), "seed {seed}: steps_used differs from log length");
    Ok(())
}

pub fn check() -> Result<String, String> {
    let fixed = five_seven_seven_seven()?;
    for seed in 0..RUNS {
        randomized(seed)?;
    }
    Ok(format!("{fixed}; {RUNS} randomized runs kept levels in order"))
}
