use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};

use thiserror::Error;

use super::aggregate::{aggregate, render_table, PipelineSummary};
use super::dataset::GroundTruthEntry;
use super::oracle::{leak_check, LeakCheck};
use super::pipeline::{run_pipeline, HarnessConfig, PipelineSpec, RunReport};
use crate::domain::{IdGen, InspirationCorpus};
use crate::llm::Gateway;
use crate::protocol::{EventPayload, SessionExport};

/// Builds the engine gateway and, optionally, a separate oracle gateway for
/// one run; without one the oracle shares the engine's. Each run gets fresh
/// gateways so call counts stay isolated.
pub type GatewayFactory<'a> = dyn Fn() -> Result<(Gateway, Option<Gateway>), String> + Sync + 'a;

#[derive(Clone, Debug)]
pub struct BatchOptions {
    pub workers: usize,
    /// Where reports, tables and session exports are written, if anywhere.
    pub out_dir: Option<PathBuf>,
}

impl Default for BatchOptions {
    fn default() -> Self {
        Self {
            workers: 1,
            out_dir: None,
        }
    }
}

#[derive(Debug, Error)]
pub enum BatchError {
    #[error("cannot write results: {0}")]
    Io(#[from] io::Error),
    #[error("no pipelines to run")]
    NoPipelines,
}

#[derive(Clone, Debug)]
pub struct BatchOutcome {
    /// Reports in (pipeline, entry) order regardless of worker scheduling.
    pub reports: Vec<RunReport>,
    pub summaries: Vec<PipelineSummary>,
    pub exports: Vec<Option<SessionExport>>,
}

impl BatchOutcome {
    pub fn all_complete(&self) -> bool {
        self.reports.iter().all(|r| r.complete)
    }
}

/// Runs every pipeline on every entry. Id generation is seeded per run from
/// the harness seed and the run index, so results do not depend on worker
/// count.
pub fn run_batch(
    entries: &[GroundTruthEntry],
    corpus: Arc<InspirationCorpus>,
    pipelines: &[PipelineSpec],
    config: &HarnessConfig,
    factory: &GatewayFactory<'_>,
    options: &BatchOptions,
) -> Result<BatchOutcome, BatchError> {
    if pipelines.is_empty() {
        return Err(BatchError::NoPipelines);
    }
    let jobs: Vec<(&PipelineSpec, &GroundTruthEntry)> = pipelines
        .iter()
        .flat_map(|p| entries.iter().map(move |e| (p, e)))
        .collect();
    let next = AtomicUsize::new(0);
    let results = Mutex::new(vec![None; jobs.len()]);
    std::thread::scope(|scope| {
        for _ in 0..options.workers.max(1).min(jobs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((spec, entry)) = jobs.get(i) else { break };
                let ids = IdGen::deterministic(config.seed.wrapping_add(i as u64));
                let output = match factory() {
                    Ok((gateway, oracle)) => {
                        let oracle = oracle.as_ref().unwrap_or(&gateway);
                        run_pipeline(spec, entry, corpus.clone(), config, &gateway, oracle, ids)
                    }
                    Err(error) => super::pipeline::RunOutput {
                        report: failed_report(spec, entry, error),
                        export: None,
                    },
                };
                tracing::debug!(pipeline = %spec.name, entry = %entry.id, complete = output.report.complete, "run finished");
                results.lock().expect("result slot lock")[i] = Some(output);
            });
        }
    });
    let (reports, exports): (Vec<_>, Vec<_>) = results
        .into_inner()
        .expect("result slot lock")
        .into_iter()
        .map(|o| {
            let o = o.expect("every job ran");
            (o.report, o.export)
        })
        .unzip();
    let outcome = BatchOutcome {
        summaries: aggregate(&reports),
        reports,
        exports,
    };
    if let Some(dir) = &options.out_dir {
        write_outputs(dir, &outcome)?;
    }
    Ok(outcome)
}

fn failed_report(spec: &PipelineSpec, entry: &GroundTruthEntry, error: String) -> RunReport {
    RunReport {
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
    }
}

fn write_outputs(dir: &Path, outcome: &BatchOutcome) -> io::Result<()> {
    let sessions = dir.join("sessions");
    fs::create_dir_all(&sessions)?;
    let mut jsonl = fs::File::create(dir.join("reports.jsonl"))?;
    for report in &outcome.reports {
        writeln!(jsonl, "{}", serde_json::to_string(report).map_err(io::Error::other)?)?;
    }
    fs::write(dir.join("aggregate.txt"), render_table(&outcome.summaries))?;
    fs::write(
        dir.join("aggregate.json"),
        serde_json::to_string_pretty(&outcome.summaries).map_err(io::Error::other)?,
    )?;
    for (report, export) in outcome.reports.iter().zip(&outcome.exports) {
        if let Some(export) = export {
            let name = format!("{}__{}.json", report.pipeline, report.entry_id.replace(['/', '\\'], "_"));
            fs::write(sessions.join(name), export.to_json())?;
        }
    }
    Ok(())
}

/// Every feedback text in the exports that shares a leak window with its
/// entry, as `(entry id, feedback)`.
pub fn audit_feedback<'a>(
    runs: impl IntoIterator<Item = (&'a GroundTruthEntry, &'a SessionExport)>,
) -> Vec<(String, String)> {
    let mut leaks = Vec::new();
    for (entry, export) in runs {
        for event in &export.events {
            if let EventPayload::FeedbackApplied { feedback, .. } = &event.payload {
                if let LeakCheck::Fail { .. } = leak_check(feedback, entry) {
                    leaks.push((entry.id.clone(), feedback.clone()));
                }
            }
        }
    }
    leaks
}
