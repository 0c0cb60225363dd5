//! Random action sequences filtered through the session state machine, and
//! hand-forged logs that must be rejected.

use std::sync::Arc;
use std::time::Instant;

use moose_core::domain::{IdGen, NodeId, Stage};
use moose_core::explore::{ExploreConfig, ExploratoryEngine};
use moose_core::llm::{Gateway, SyntheticBackend};
use moose_core::protocol::{validate_trace, EventPayload, ProtocolError, ProtocolEvent, Session};
use moose_core::refine::{RefineConfig, RefinementEngine, Scorer};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::common;
use crate::ensure;

const SEQUENCES: u64 = 1000;

fn pick(rng: &mut StdRng, session: &Session) -> NodeId {
    if rng.random_bool(0.05) {
        return NodeId::new("n-0000000000000-999999");
    }
    let ids: Vec<&NodeId> = session.tree().nodes().map(|n| &n.id).collect();
    ids[rng.random_range(0..ids.len())].clone()
}

/// Runs one random sequence; returns (accepted, rejected) action counts.
fn run_sequence(seed: u64) -> Result<(usize, usize), String> {
    let mut rng = StdRng::seed_from_u64(seed);
    let gateway = Gateway::new(Arc::new(SyntheticBackend::new(seed)));
    let explorer = ExploratoryEngine::new(
        &gateway,
        ExploreConfig { beam_width: 2, shortlist_size: 4, max_rounds: 2 },
    );
    let refine_config = RefineConfig { max_steps_per_level: 3, ..RefineConfig::default() };
    let refiner = RefinementEngine::new(&gateway, Scorer::with_default_criteria(&gateway), refine_config);
    let blueprint = rng.random_bool(0.5).then(|| "Stay within aqueous chemistry.".to_string());
    let mut session = Session::init("How can amination be greener?", None, blueprint, common::corpus(), IdGen::deterministic(seed))
        .map_err(|e| e.to_string())?;
    let (mut accepted, mut rejected) = (0, 0);
    for _ in 0..rng.random_range(1..10) {
        let node = pick(&mut rng, &session);
        let before = session.events().len();
        let base = session.state().base_context().clone();
        let result = match rng.random_range(0..5) {
            0 => session.explore(&explorer, &node).map(|_| ()),
            1 => session.refine(&refiner, &node).map(|_| ()),
            2 => {
                let target = if rng.random_bool(0.5) { Stage::Exploratory } else { Stage::FineGrained };
                session.route(&node, target).map(|_| ())
            }
            3 => {
                let text = if rng.random_bool(0.1) { "   " } else { "Prefer earth-abundant metals." };
                session.apply_feedback(&node, text).map(|_| ())
            }
            _ => {
                let candidates: Vec<NodeId> = session.tree().leaves().iter().map(|n| n.id.clone()).collect();
                session.self_rank(&Scorer::with_default_criteria(&gateway), &candidates).map(|_| ())
            }
        };
        match result {
            Ok(()) => {
                ensure!(session.events().len() == before + 1, "accepted action must record one event");
                accepted += 1;
            }
            // a failed refinement still records its partial run
            Err(ProtocolError::RefineIncomplete(_)) => {
                ensure!(session.events().len() == before + 1, "partial refinement must be recorded");
                accepted += 1;
            }
            Err(_) => {
                ensure!(session.events().len() == before, "rejected action changed the log");
                rejected += 1;
            }
        }
        for n in session.tree().nodes() {
            let ctx = session.context_for(&n.id).map_err(|e| e.to_string())?;
            ensure!(ctx.extends(&base), "context of {} does not extend the base", n.id);
        }
    }
    let export = session.export();
    validate_trace(&export.events).map_err(|e| format!("seed {seed}: {e}"))?;
    session.tree().validate().map_err(|e| format!("seed {seed}: {e}"))?;
    let restored = Session::restore(&export, common::corpus(), IdGen::deterministic(0)).map_err(|e| e.to_string())?;
    ensure!(restored.export().to_json() == export.to_json(), "seed {seed}: replay differs");
    Ok((accepted, rejected))
}

/// A valid log with explore, route and refine, used as the base for forgeries.
fn valid_log() -> Result<Vec<ProtocolEvent>, String> {
    let gateway = Gateway::new(Arc::new(SyntheticBackend::new(3)));
    let explorer = ExploratoryEngine::new(&gateway, ExploreConfig::default());
    let refiner = RefinementEngine::new(&gateway, Scorer::with_default_criteria(&gateway), RefineConfig::default());
    let mut session = Session::init("q?", None, None, common::corpus(), IdGen::deterministic(1)).map_err(|e| e.to_string())?;
    let root = session.tree().root_id().clone();
    session.explore(&explorer, &root).map_err(|e| e.to_string())?;
    let leaf = session.tree().leaves()[0].id.clone();
    session.route(&leaf, Stage::FineGrained).map_err(|e| e.to_string())?;
    session.refine(&refiner, &leaf).map_err(|e| e.to_string())?;
    Ok(session.events().to_vec())
}

fn forged(events: &[ProtocolEvent], payload: EventPayload) -> Vec<ProtocolEvent> {
    let last = events.last().unwrap();
    let id = format!("{}x", last.id);
    let mut out = events.to_vec();
    out.push(ProtocolEvent::new(id.as_str().into(), last.timestamp, payload));
    out
}

fn invalid_sequences() -> Result<usize, String> {
    let log = valid_log()?;
    validate_trace(&log).map_err(|e| format!("base log invalid: {e}"))?;
    let root = match &log[0].payload {
        EventPayload::Init { root, .. } => root.id.clone(),
        _ => return Err("first event is not init".into()),
    };

    // refine before route: drop the routing event
    let no_route: Vec<ProtocolEvent> = log.iter().filter(|e| !matches!(e.payload, EventPayload::Routed { .. })).cloned().collect();
    ensure!(validate_trace(&no_route).is_err(), "refine-before-route accepted");

    let same_stage = forged(
        &log[..1],
        EventPayload::Routed { node: root.clone(), from: Stage::Exploratory, target: Stage::Exploratory, summary: None, chooser: None },
    );
    ensure!(validate_trace(&same_stage).is_err(), "same-stage route accepted");

    let ghost = forged(
        &log,
        EventPayload::FeedbackApplied { node: "n-ghost".into(), prior: String::new(), feedback: "f".into(), chooser: None },
    );
    ensure!(validate_trace(&ghost).is_err(), "feedback on unknown node accepted");

    // the same three through the live API
    let gateway = Gateway::new(Arc::new(SyntheticBackend::new(0)));
    let refiner = RefinementEngine::new(&gateway, Scorer::with_default_criteria(&gateway), RefineConfig::default());
    let mut session = Session::init("q?", None, None, common::corpus(), IdGen::deterministic(2)).map_err(|e| e.to_string())?;
    let root = session.tree().root_id().clone();
    ensure!(matches!(session.refine(&refiner, &root), Err(ProtocolError::StageMismatch { .. })), "live refine-before-route accepted");
    ensure!(session.route(&root, Stage::Exploratory).is_err(), "live same-stage route accepted");
    ensure!(session.apply_feedback(&"n-ghost".into(), "f").map_err(|e| e.is_unknown_node()) == Err(true), "live ghost feedback accepted");
    ensure!(session.events().len() == 1, "rejections changed the log");
    Ok(6)
}

pub fn check() -> Result<String, String> {
    let started = Instant::now();
    let (mut accepted, mut rejected) = (0, 0);
    for seed in 0..SEQUENCES {
        let (a, r) = run_sequence(seed)?;
        accepted += a;
        rejected += r;
    }
    let elapsed = started.elapsed();
    let forged = invalid_sequences()?;
    ensure!(elapsed.as_secs_f64() < 10.0, "random sequences took {:.2}s", elapsed.as_secs_f64());
    ensure!(accepted > 0 && rejected > 0, "sequences never exercised both outcomes");
    Ok(format!(
        "{SEQUENCES} sequences ({accepted} actions accepted, {rejected} rejected) in {:.2}s; {forged} invalid sequences rejected",
        elapsed.as_secs_f64()
    ))
}
