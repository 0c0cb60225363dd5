use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use super::error::GatewayError;

/// The fixed set of prompt templates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    SelectInspiration,
    GenerateHypothesis,
    ProposeRefinement,
    ScoreHypothesis,
    OracleFeedback,
    OracleRank,
}

impl TemplateId {
    pub const ALL: [TemplateId; 6] = [
        TemplateId::SelectInspiration,
        TemplateId::GenerateHypothesis,
        TemplateId::ProposeRefinement,
        TemplateId::ScoreHypothesis,
        TemplateId::OracleFeedback,
        TemplateId::OracleRank,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::SelectInspiration => "select_inspiration",
            TemplateId::GenerateHypothesis => "generate_hypothesis",
            TemplateId::ProposeRefinement => "propose_refinement",
            TemplateId::ScoreHypothesis => "score_hypothesis",
            TemplateId::OracleFeedback => "oracle_feedback",
            TemplateId::OracleRank => "oracle_rank",
        }
    }

    pub(crate) fn index(self) -> usize {
        self as usize
    }

    /// Exploratory templates run hot; refinement, scoring and oracle templates run cool.
    pub fn default_temperature(self) -> f64 {
        match self {
            TemplateId::SelectInspiration | TemplateId::GenerateHypothesis => 1.0,
            _ => 0.3,
        }
    }

    fn builtin(self) -> &'static str {
        match self {
            TemplateId::SelectInspiration => include_str!("../../templates/select_inspiration.txt"),
            TemplateId::GenerateHypothesis => {
                include_str!("../../templates/generate_hypothesis.txt")
            }
            TemplateId::ProposeRefinement => include_str!("../../templates/propose_refinement.txt"),
            TemplateId::ScoreHypothesis => include_str!("../../templates/score_hypothesis.txt"),
            TemplateId::OracleFeedback => include_str!("../../templates/oracle_feedback.txt"),
            TemplateId::OracleRank => include_str!("../../templates/oracle_rank.txt"),
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown template id {s:?}"))
    }
}

fn placeholder() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([a-z_][a-z0-9_]*)\}").expect("valid regex"))
}

/// Template texts keyed by id, with `{variable}` placeholders.
#[derive(Clone, Debug)]
pub struct TemplateSet {
    texts: BTreeMap<TemplateId, String>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        Self::builtin()
    }
}

impl TemplateSet {
    pub fn builtin() -> Self {
        Self {
            texts: TemplateId::ALL
                .into_iter()
                .map(|t| (t, t.builtin().to_string()))
                .collect(),
        }
    }

    /// Built-in templates overridden by any `{id}.txt` found in `dir`.
    pub fn with_overrides(dir: &Path) -> std::io::Result<Self> {
        let mut set = Self::builtin();
        for id in TemplateId::ALL {
            let path = dir.join(format!("{}.txt", id.as_str()));
            if path.exists() {
                set.texts.insert(id, std::fs::read_to_string(path)?);
            }
        }
        Ok(set)
    }

    pub fn set(&mut self, id: TemplateId, text: impl Into<String>) {
        self.texts.insert(id, text.into());
    }

    pub fn text(&self, id: TemplateId) -> &str {
        &self.texts[&id]
    }

    pub fn variables(&self, id: TemplateId) -> BTreeSet<String> {
        placeholder()
            .captures_iter(self.text(id))
            .map(|c| c[1].to_string())
            .collect()
    }

    pub fn render(
        &self,
        id: TemplateId,
        variables: &BTreeMap<String, String>,
    ) -> Result<String, GatewayError> {
        if let Some(missing) = self
            .variables(id)
            .into_iter()
            .find(|v| !variables.contains_key(v))
        {
            return Err(GatewayError::TemplateVariableMissing {
                template: id,
                variable: missing,
            });
        }
        Ok(placeholder()
            .replace_all(self.text(id), |caps: &regex::Captures<'_>| {
                variables[&caps[1]].clone()
            })
            .into_owned())
    }
}
