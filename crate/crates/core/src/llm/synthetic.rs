use std::collections::BTreeSet;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::OnceLock;

use regex::Regex;

use super::backend::{Backend, BackendReply, BackendRequest};
use super::error::BackendError;
use super::fields::render_field;
use super::template::TemplateId;

/// Deterministic stand-in model for smoke runs and randomized tests.
///
/// Replies are well-formed filler derived from a seed and a call counter, so
/// any sequence of requests succeeds and the same sequence always yields the
/// same replies.
#[derive(Debug, Default)]
pub struct SyntheticBackend {
    seed: u64,
    calls: AtomicU64,
}

impl SyntheticBackend {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            calls: AtomicU64::new(0),
        }
    }

    fn mix(&self, n: u64) -> u64 {
        // splitmix64 finalizer
        let mut z = self.seed.wrapping_add(n).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
}

fn tag_pattern() -> &'static Regex {
    static TAG: OnceLock<Regex> = OnceLock::new();
    TAG.get_or_init(|| Regex::new(r"«([a-z_]+)»").expect("valid regex"))
}

impl Backend for SyntheticBackend {
    fn name(&self) -> &str {
        "synthetic"
    }

    fn generate(&self, request: &BackendRequest<'_>) -> Result<BackendReply, BackendError> {
        let n = self.calls.fetch_add(1, Ordering::SeqCst);
        let r = self.mix(n);
        let text = match request.template {
            TemplateId::SelectInspiration => {
                let ids: Vec<&str> = request
                    .prompt
                    .lines()
                    .filter(|l| l.contains(" -- "))
                    .filter_map(|l| l.split_once(": ").map(|(id, _)| id.trim()))
                    .collect();
                render_field("inspirations", &ids.join(", "))
            }
            TemplateId::GenerateHypothesis => {
                render_field("hypothesis", &format!("synthetic hypothesis {n} variant {}", r % 97))
            }
            TemplateId::ProposeRefinement => {
                render_field("hypothesis", &format!("synthetic refinement {n} variant {}", r % 97))
            }
            TemplateId::ScoreHypothesis => {
                let tags: BTreeSet<&str> = tag_pattern()
                    .captures_iter(request.prompt)
                    .map(|c| c.get(1).expect("group").as_str())
                    .collect();
                tags.iter()
                    .enumerate()
                    .map(|(i, tag)| render_field(tag, &((r >> (i * 8)) % 11).to_string()))
                    .collect()
            }
            TemplateId::OracleFeedback => render_field(
                "feedback",
                &format!("Consider a more concrete mechanism for direction {}.", r % 13),
            ),
            TemplateId::OracleRank => render_field("ranking", ""),
        };
        Ok(BackendReply {
            tokens_used: text.split_whitespace().count() as u64,
            text,
        })
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}
