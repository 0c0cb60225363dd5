use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use moose_core::domain::DEFAULT_CRITERIA;
use moose_core::llm::{
    render_field, Backend, BackendError, BackendReply, BackendRequest, Gateway, Script,
    SyntheticBackend, TemplateId,
};

/// Fails the enclosing check with a formatted message.
#[macro_export]
macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let held: bool = $cond;
        if !held {
            return Err(format!($($fmt)+));
        }
    };
}

pub fn score_reply(value: f64) -> String {
    DEFAULT_CRITERIA.iter().map(|c| render_field(c, &value.to_string())).collect()
}

/// A script that can drive any pipeline: every template has a long run of
/// identical replies, so refinement sees a flat landscape.
pub fn pipeline_script() -> Script {
    let mut script = Script::new();
    script
        .push_repeated(TemplateId::SelectInspiration, render_field("inspirations", "p1, p2, p3, p4"), 10_000)
        .push_repeated(TemplateId::GenerateHypothesis, render_field("hypothesis", "Couple aryl halides through a photoactive copper complex."), 10_000)
        .push_repeated(TemplateId::ProposeRefinement, render_field("hypothesis", "Use a copper photocatalyst with blue light at 25 C."), 10_000)
        .push_repeated(TemplateId::ScoreHypothesis, score_reply(6.0), 10_000)
        .push_repeated(TemplateId::OracleFeedback, render_field("feedback", "Consider the role of the reaction medium and the temperature regime."), 10_000);
    script
}

pub fn scripted() -> Gateway {
    Gateway::new(Arc::new(pipeline_script().build()))
}

/// Reward landscape where scores climb slowly, but a context carrying
/// researcher feedback scores high from the start. Other templates get
/// synthetic replies.
pub struct FeedbackLandscape {
    filler: SyntheticBackend,
    calls: AtomicU64,
}

impl FeedbackLandscape {
    pub fn new() -> Self {
        Self {
            filler: SyntheticBackend::new(17),
            calls: AtomicU64::new(0),
        }
    }
}

impl Backend for FeedbackLandscape {
    fn name(&self) -> &str {
        "feedback-landscape"
    }

    fn generate(&self, request: &BackendRequest<'_>) -> Result<BackendReply, BackendError> {
        if request.template != TemplateId::ScoreHypothesis {
            return self.filler.generate(request);
        }
        let value = if request.prompt.contains("Researcher feedback:") {
            9.0
        } else {
            let n = self.calls.fetch_add(1, Ordering::SeqCst) as f64;
            (1.0 + 0.05 * n).min(8.5)
        };
        Ok(BackendReply {
            text: score_reply(value),
            tokens_used: 1,
        })
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}
