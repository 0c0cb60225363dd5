//! Oracle feedback never shares an 8-token run with the reference, and a
//! critique that copies the reference is refused.

use std::sync::Arc;

use moose_core::domain::IdGen;
use moose_core::eval::{
    audit_feedback, find_pipeline, leak_check, oracle_feedback, run_pipeline, standard_pipelines,
    FeedbackStrength, GroundTruthEntry, HarnessConfig, OracleError, LEAK_NGRAM, LEAK_RETRIES,
};
use moose_core::llm::{render_field, Gateway, Script, TemplateId};
use moose_core::protocol::{EventPayload, SessionExport};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use super::common;
use super::support;
use crate::ensure;

const RANDOM_TEXTS: u64 = 500;

fn words(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split(|c: char| !c.is_alphanumeric())
        .filter(|w| !w.is_empty())
        .map(str::to_string)
        .collect()
}

/// Brute force: does any window of the feedback occur contiguously in a
/// reference text?
fn leaks(feedback: &str, entry: &GroundTruthEntry) -> bool {
    let fb = words(feedback);
    let refs: Vec<Vec<String>> = std::iter::once(&entry.fine_grained_hypothesis)
        .chain(&entry.elements)
        .map(|t| words(t))
        .collect();
    if fb.len() < LEAK_NGRAM {
        return false;
    }
    for i in 0..=fb.len() - LEAK_NGRAM {
        for r in &refs {
            if r.len() < LEAK_NGRAM {
                continue;
            }
            for j in 0..=r.len() - LEAK_NGRAM {
                if (0..LEAK_NGRAM).all(|k| fb[i + k] == r[j + k]) {
                    return true;
                }
            }
        }
    }
    false
}

fn random_feedback(rng: &mut StdRng, entry: &GroundTruthEntry) -> String {
    let reference = words(&entry.fine_grained_hypothesis);
    let filler = ["consider", "the", "solvent", "light", "scale", "temperature", "catalyst", "role"];
    let mut out: Vec<String> = Vec::new();
    while out.len() < 30 {
        if rng.random_bool(0.06) {
            let len = rng.random_range(4..11).min(reference.len());
            let start = rng.random_range(0..=reference.len() - len);
            out.extend(reference[start..start + len].iter().cloned());
        } else {
            out.push(filler[rng.random_range(0..filler.len())].to_string());
        }
    }
    let mut text = out.join(" ");
    if rng.random_bool(0.5) {
        text = text.to_uppercase().replace(' ', ", ");
    }
    text
}

fn agrees_with_brute_force() -> Result<usize, String> {
    let mut rng = StdRng::seed_from_u64(8);
    let entries = common::entries();
    let mut leaking = 0;
    for _ in 0..RANDOM_TEXTS {
        let entry = &entries[rng.random_range(0..entries.len())];
        let text = random_feedback(&mut rng, entry);
        let expected = leaks(&text, entry);
        ensure!(leak_check(&text, entry).passed() != expected, "leak_check disagrees on {text:?}");
        leaking += usize::from(expected);
    }
    Ok(leaking)
}

fn leaking_oracle(entry: &GroundTruthEntry) -> Gateway {
    let span: Vec<&str> = entry.fine_grained_hypothesis.split_whitespace().take(12).collect();
    let mut script = Script::new();
    script.push_repeated(TemplateId::OracleFeedback, render_field("feedback", &format!("Try this: {}", span.join(" "))), 1000);
    Gateway::new(Arc::new(script.build()))
}

fn deliberate_leak_rejected() -> Result<(), String> {
    let entry = &common::entries()[0];
    let oracle = leaking_oracle(entry);
    match oracle_feedback(&oracle, "An unrelated idea.", entry, FeedbackStrength::Standard) {
        Err(OracleError::LeakUnfixable { .. }) => {}
        other => return Err(format!("deliberate leak not refused: {other:?}")),
    }
    let calls = oracle.calls_for(TemplateId::OracleFeedback);
    ensure!(calls == LEAK_RETRIES as u64 + 1, "oracle called {calls} times");

    let row = find_pipeline("MC2_with_strong_feedback_oracle_rank").ok_or("row missing")?;
    let engine = support::scripted();
    let out = run_pipeline(&row.spec, entry, common::corpus(), &HarnessConfig::default(), &engine, &oracle, IdGen::deterministic(3));
    let export = out.export.ok_or("no export")?;
    ensure!(audit_feedback([(entry, &export)]).is_empty(), "leaked feedback was applied");
    Ok(())
}

fn feedback_count(export: &SessionExport) -> usize {
    export.events.iter().filter(|e| matches!(e.payload, EventPayload::FeedbackApplied { .. })).count()
}

pub fn check() -> Result<String, String> {
    let leaking = agrees_with_brute_force()?;
    deliberate_leak_rejected()?;
    let entries = common::entries();
    let config = HarnessConfig::default();
    let mut applied = 0;
    let mut runs = 0;
    for row in standard_pipelines().iter().filter(|r| r.spec.feedback_rounds > 0) {
        for (i, entry) in entries.iter().enumerate() {
            for gateway in [support::scripted(), common::synthetic(i as u64)] {
                let out = run_pipeline(&row.spec, entry, common::corpus(), &config, &gateway, &gateway, IdGen::deterministic(9));
                let export = out.export.ok_or("no export")?;
                let leaks = audit_feedback([(entry, &export)]);
                ensure!(leaks.is_empty(), "{}: leaked feedback {:?}", row.spec.name, leaks);
                applied += feedback_count(&export);
                runs += 1;
            }
        }
    }
    ensure!(applied > 0, "no feedback was applied");
    Ok(format!(
        "{RANDOM_TEXTS} texts match brute force ({leaking} leaking); deliberate leak refused; {applied} feedback events over {runs} runs all clean"
    ))
}
