use serde::{Deserialize, Serialize};

use super::error::DomainError;
use super::ids::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdditionKind {
    PriorHypothesis,
    Feedback,
}

/// One entry appended to a background when feedback or routing widens it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextAddition {
    pub kind: AdditionKind,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_node: Option<NodeId>,
}

impl ContextAddition {
    pub fn prior_hypothesis(source: NodeId, text: impl Into<String>) -> Result<Self, DomainError> {
        Self::checked(AdditionKind::PriorHypothesis, text.into(), Some(source))
    }

    pub fn feedback(text: impl Into<String>, source: Option<NodeId>) -> Result<Self, DomainError> {
        Self::checked(AdditionKind::Feedback, text.into(), source)
    }

    fn checked(
        kind: AdditionKind,
        text: String,
        source_node: Option<NodeId>,
    ) -> Result<Self, DomainError> {
        let addition = Self {
            kind,
            text,
            source_node,
        };
        addition.validate()?;
        Ok(addition)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if self.text.trim().is_empty() {
            return Err(DomainError::EmptyAddition);
        }
        if self.kind == AdditionKind::PriorHypothesis && self.source_node.is_none() {
            return Err(DomainError::MissingSourceNode);
        }
        Ok(())
    }
}

/// The research background a generation is conditioned on.
///
/// Derived contexts only ever append to `additions`; the base fields are
/// fixed once the context is created.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResearchContext {
    pub question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub survey: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub blueprint: Option<String>,
    #[serde(default)]
    pub additions: Vec<ContextAddition>,
}

impl ResearchContext {
    pub fn new(
        question: impl Into<String>,
        survey: Option<String>,
        blueprint: Option<String>,
    ) -> Result<Self, DomainError> {
        let ctx = Self {
            question: question.into(),
            survey: normalize_optional(survey),
            blueprint: normalize_optional(blueprint),
            additions: Vec::new(),
        };
        ctx.validate()?;
        Ok(ctx)
    }

    pub fn validate(&self) -> Result<(), DomainError> {
        if self.question.trim().is_empty() {
            return Err(DomainError::EmptyQuestion);
        }
        self.additions.iter().try_for_each(ContextAddition::validate)
    }

    /// Returns a derived context with `addition` appended.
    pub fn with_addition(&self, addition: ContextAddition) -> Self {
        let mut next = self.clone();
        next.additions.push(addition);
        next
    }

    /// True when `self` shares base fields with `base` and extends its additions.
    pub fn extends(&self, base: &ResearchContext) -> bool {
        self.question == base.question
            && self.survey == base.survey
            && self.blueprint == base.blueprint
            && self.additions.starts_with(&base.additions)
    }

    /// Canonical text of the synthetic root node.
    pub fn seed_text(&self) -> String {
        let mut text = format!("Research question: {}", self.question.trim());
        if let Some(blueprint) = &self.blueprint {
            text.push_str("\nBlueprint: ");
            text.push_str(blueprint.trim());
        }
        text
    }

    /// Prompt-facing rendering of the full background.
    pub fn render(&self) -> String {
        let mut out = format!("Research question: {}", self.question.trim());
        if let Some(survey) = &self.survey {
            out.push_str("\n\nLiterature survey:\n");
            out.push_str(survey.trim());
        }
        if let Some(blueprint) = &self.blueprint {
            out.push_str("\n\nInitial blueprint (constraints from the researcher):\n");
            out.push_str(blueprint.trim());
        }
        for addition in &self.additions {
            match addition.kind {
                AdditionKind::PriorHypothesis => out.push_str("\n\nPrior hypothesis:\n"),
                AdditionKind::Feedback => out.push_str("\n\nResearcher feedback:\n"),
            }
            out.push_str(addition.text.trim());
        }
        out
    }
}

fn normalize_optional(value: Option<String>) -> Option<String> {
    value.filter(|v| !v.trim().is_empty())
}
