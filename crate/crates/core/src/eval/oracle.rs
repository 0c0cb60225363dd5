//! Simulated navigator: ranks and critiques with access to the reference.

use std::collections::{HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::dataset::GroundTruthEntry;
use super::recall::{element_tokens, match_element};
use crate::domain::NodeId;
use crate::llm::{Gateway, GatewayError, GenerationRequest, TemplateId};
use crate::text::tokens;

/// Shared normalized spans at least this long count as disclosure.
pub const LEAK_NGRAM: usize = 8;

/// Regenerations allowed after a leaking critique.
pub const LEAK_RETRIES: usize = 2;

pub const NO_GAPS_FEEDBACK: &str =
    "No gaps remain: the candidate already covers every key component. Keep the current direction and tighten the wording.";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FeedbackStrength {
    Soft,
    Standard,
    Strong,
}

impl FeedbackStrength {
    pub const ALL: [FeedbackStrength; 3] = [Self::Soft, Self::Standard, Self::Strong];

    pub fn instructions(self) -> &'static str {
        match self {
            FeedbackStrength::Soft => {
                "Name only the single most important high-level theme the candidate is missing, in one sentence."
            }
            FeedbackStrength::Standard => {
                "List the aspects the candidate is missing as short research directions, one per line."
            }
            FeedbackStrength::Strong => {
                "For every uncovered component, give one itemized critique that says what kind of change would address it and why."
            }
        }
    }
}

impl fmt::Display for FeedbackStrength {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum LeakCheck {
    Pass,
    Fail { span: String },
}

impl LeakCheck {
    pub fn passed(&self) -> bool {
        matches!(self, LeakCheck::Pass)
    }
}

fn reference_texts(entry: &GroundTruthEntry) -> impl Iterator<Item = &str> {
    std::iter::once(entry.fine_grained_hypothesis.as_str()).chain(entry.elements.iter().map(String::as_str))
}

/// Indices `i` where `feedback[i..i + LEAK_NGRAM]` also occurs in a reference text.
fn leaking_windows(feedback: &[String], entry: &GroundTruthEntry) -> Vec<usize> {
    let mut grams: HashSet<Vec<String>> = HashSet::new();
    for text in reference_texts(entry) {
        for window in tokens(text).windows(LEAK_NGRAM) {
            grams.insert(window.to_vec());
        }
    }
    feedback
        .windows(LEAK_NGRAM)
        .enumerate()
        .filter(|(_, w)| grams.contains(*w))
        .map(|(i, _)| i)
        .collect()
}

/// Fails when `feedback` shares a normalized n-gram of `LEAK_NGRAM` or more
/// tokens with the reference hypothesis or any element. The reported span is
/// the first maximal run of shared windows.
pub fn leak_check(feedback: &str, entry: &GroundTruthEntry) -> LeakCheck {
    let words = tokens(feedback);
    let hits = leaking_windows(&words, entry);
    let Some(&first) = hits.first() else {
        return LeakCheck::Pass;
    };
    let mut end = first;
    for &i in &hits[1..] {
        if i == end + 1 {
            end = i;
        } else {
            break;
        }
    }
    LeakCheck::Fail {
        span: words[first..end + LEAK_NGRAM].join(" "),
    }
}

/// Normalized feedback with every token inside a shared span replaced.
pub fn redact(feedback: &str, entry: &GroundTruthEntry) -> String {
    let words = tokens(feedback);
    let mut hidden = vec![false; words.len()];
    for i in leaking_windows(&words, entry) {
        hidden[i..i + LEAK_NGRAM].iter_mut().for_each(|h| *h = true);
    }
    let mut out: Vec<&str> = Vec::new();
    for (word, hide) in words.iter().zip(&hidden) {
        if !*hide {
            out.push(word);
        } else if out.last() != Some(&"[redacted]") {
            out.push("[redacted]");
        }
    }
    out.join(" ")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("oracle feedback kept disclosing the reference: {span:?}")]
    LeakUnfixable { span: String, redacted: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

/// Reference elements not yet recovered by `hypothesis`.
pub fn missing_elements<'e>(hypothesis: &str, entry: &'e GroundTruthEntry) -> Vec<&'e str> {
    entry
        .elements
        .iter()
        .filter(|e| !match_element(hypothesis, e))
        .map(String::as_str)
        .collect()
}

/// Directional critique from the oracle model. A critique that leaks the
/// reference is regenerated up to `LEAK_RETRIES` times.
pub fn oracle_feedback(
    gateway: &Gateway,
    hypothesis: &str,
    entry: &GroundTruthEntry,
    strength: FeedbackStrength,
) -> Result<String, OracleError> {
    let missing = missing_elements(hypothesis, entry);
    if missing.is_empty() {
        return Ok(NO_GAPS_FEEDBACK.to_string());
    }
    let listing: Vec<String> = missing.iter().map(|m| format!("- {m}")).collect();
    let request = GenerationRequest::new(TemplateId::OracleFeedback)
        .var("ground_truth", &entry.fine_grained_hypothesis)
        .var("missing", listing.join("\n"))
        .var("hypothesis", hypothesis)
        .var("instructions", strength.instructions());
    let mut last = None;
    for _ in 0..=LEAK_RETRIES {
        let text = gateway.complete_parsed(&request, &["feedback"])?.remove("feedback").unwrap_or_default();
        match leak_check(&text, entry) {
            LeakCheck::Pass => return Ok(text),
            LeakCheck::Fail { span } => last = Some((span, text)),
        }
    }
    let (span, text) = last.expect("at least one attempt");
    Err(OracleError::LeakUnfixable {
        span,
        redacted: redact(&text, entry),
    })
}

/// Recall of each candidate plus the tie-break key: total content tokens of
/// the elements it matches, so matching longer elements ranks higher.
fn rank_key(text: &str, entry: &GroundTruthEntry) -> (usize, usize) {
    let mut count = 0;
    let mut weight = 0;
    for element in &entry.elements {
        if match_element(text, element) {
            count += 1;
            weight += element_tokens(element).len();
        }
    }
    (count, weight)
}

/// Deterministic oracle ranking: recall descending, then matched-element
/// length descending, then node id.
pub fn oracle_rank(candidates: &[(NodeId, &str)], entry: &GroundTruthEntry) -> Vec<NodeId> {
    let mut keyed: Vec<(&NodeId, (usize, usize))> = candidates
        .iter()
        .map(|(id, text)| (id, rank_key(text, entry)))
        .collect();
    keyed.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    keyed.into_iter().map(|(id, _)| id.clone()).collect()
}

/// Ranking by the oracle model. Ids it omits follow in deterministic order.
pub fn oracle_rank_llm(
    gateway: &Gateway,
    candidates: &[(NodeId, &str)],
    entry: &GroundTruthEntry,
) -> Result<Vec<NodeId>, GatewayError> {
    let listing: Vec<String> = candidates.iter().map(|(id, text)| format!("{id}: {text}")).collect();
    let request = GenerationRequest::new(TemplateId::OracleRank)
        .var("ground_truth", &entry.fine_grained_hypothesis)
        .var("candidates", listing.join("\n"));
    let valid: HashMap<&str, &NodeId> = candidates.iter().map(|(id, _)| (id.as_str(), id)).collect();
    let mut ranked: Vec<NodeId> = gateway.complete_with(&request, &["ranking"], |fields| {
        let mut picked: Vec<NodeId> = Vec::new();
        for raw in fields["ranking"].split(|c: char| c == ',' || c.is_whitespace()) {
            if let Some(id) = valid.get(raw.trim()) {
                if !picked.contains(id) {
                    picked.push((*id).clone());
                }
            }
        }
        if picked.is_empty() {
            Err("named no candidate id".to_string())
        } else {
            Ok(picked)
        }
    })?;
    for id in oracle_rank(candidates, entry) {
        if !ranked.contains(&id) {
            ranked.push(id);
        }
    }
    Ok(ranked)
}
