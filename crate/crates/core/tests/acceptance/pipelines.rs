//! Standard pipeline rows: composition, step accounting and determinism.

use std::sync::Arc;

use moose_core::domain::IdGen;
use moose_core::eval::{
    find_pipeline, interpret, labels_match_events, run_pipeline, standard_pipelines, HarnessConfig,
    RunOutput,
};
use moose_core::llm::{Gateway, TemplateId};
use moose_core::protocol::{validate_trace, EventPayload, Session};

use super::common;
use super::support::{self, FeedbackLandscape};
use crate::ensure;

fn run_row(name: &str, entry: usize, gateway: &Gateway, seed: u64) -> Result<RunOutput, String> {
    let row = find_pipeline(name).ok_or_else(|| format!("unknown row {name}"))?;
    let entries = common::entries();
    Ok(run_pipeline(&row.spec, &entries[entry], common::corpus(), &HarnessConfig::default(), gateway, gateway, IdGen::deterministic(seed)))
}

pub fn composition() -> Result<String, String> {
    let config = HarnessConfig::default();
    let rows = standard_pipelines();
    let mut runs = 0;
    for row in &rows {
        let expected = interpret(row.description, config.explore_rounds).map_err(|e| format!("{}: {e}", row.spec.name))?;
        for entry in 0..common::entries().len() {
            let gateway = support::scripted();
            let out = run_row(row.spec.name.as_str(), entry, &gateway, 1)?;
            let report = &out.report;
            ensure!(report.complete, "{}: {:?}", row.spec.name, report.error);
            ensure!(
                report.stage_sequence == expected,
                "{}: ran {:?}, description gives {:?}",
                row.spec.name,
                report.stage_sequence,
                expected
            );
            let export = out.export.ok_or("no export")?;
            validate_trace(&export.events).map_err(|e| format!("{}: {e}", row.spec.name))?;
            ensure!(labels_match_events(&report.stage_sequence, &export.events), "{}: labels do not match events", row.spec.name);
            runs += 1;
        }
    }
    Ok(format!("{} rows x {} entries ({runs} runs) follow their descriptions", rows.len(), common::entries().len()))
}

pub fn accounting() -> Result<String, String> {
    let mut refining = 0;
    for row in standard_pipelines() {
        for entry in 0..common::entries().len() {
            for gateway in [support::scripted(), common::synthetic(entry as u64 + 40)] {
                let out = run_row(row.spec.name.as_str(), entry, &gateway, 2)?;
                let report = &out.report;
                let calls = gateway.calls_for(TemplateId::ProposeRefinement);
                ensure!(report.search_steps == calls, "{}: search_steps {} vs {calls} proposal calls", row.spec.name, report.search_steps);
                ensure!(report.proposal_calls == calls, "{}: proposal_calls {} vs {calls}", row.spec.name, report.proposal_calls);
                ensure!(report.refine_steps.iter().sum::<u64>() == calls, "{}: per-run steps do not sum", row.spec.name);
                refining += usize::from(calls > 0);
            }
        }
    }
    let landscape = || Gateway::new(Arc::new(FeedbackLandscape::new()));
    let without = run_row("MC2_with_MC_input_oracle_rank", 0, &landscape(), 4)?.report;
    let with = run_row("MC2_with_feedback_oracle_rank", 0, &landscape(), 4)?.report;
    ensure!(without.complete && with.complete, "trend runs incomplete: {:?} {:?}", without.error, with.error);
    let before = without.final_refine_steps().ok_or("no refinement without feedback")?;
    let after = with.final_refine_steps().ok_or("no refinement with feedback")?;
    ensure!(after < before, "feedback did not reduce refinement steps: {after} vs {before}");
    Ok(format!("search_steps equals proposal calls in {refining} refining runs; refinement after feedback took {after} steps vs {before} without"))
}

pub fn determinism() -> Result<String, String> {
    let mut checked = 0;
    for row in standard_pipelines() {
        let name = row.spec.name.as_str();
        let first = run_row(name, 0, &support::scripted(), 6)?.export.ok_or("no export")?;
        let second = run_row(name, 0, &support::scripted(), 6)?.export.ok_or("no export")?;
        let json = first.to_json();
        ensure!(json == second.to_json(), "{name}: repeated runs differ");
        let restored = Session::restore_json(&json, common::corpus(), IdGen::deterministic(0)).map_err(|e| format!("{name}: {e}"))?;
        ensure!(restored.export().to_json() == json, "{name}: restore changed the export");

        let mut edited = first.clone();
        let node_event = edited.events.iter_mut().find_map(|e| match &mut e.payload {
            EventPayload::ExploreRound { nodes, .. } | EventPayload::RefineRun { nodes, .. } if !nodes.is_empty() => Some(nodes),
            _ => None,
        });
        if let Some(nodes) = node_event {
            nodes[0].text.push_str(" (edited)");
            ensure!(Session::restore(&edited, common::corpus(), IdGen::deterministic(0)).is_err(), "{name}: edited text accepted");
        }
        let mut dropped = first.clone();
        dropped.events.remove(dropped.events.len() / 2);
        ensure!(Session::restore(&dropped, common::corpus(), IdGen::deterministic(0)).is_err(), "{name}: log with a missing event accepted");
        checked += 1;
    }
    Ok(format!("{checked} rows replay byte-identically; edited logs and logs missing an event refused"))
}
