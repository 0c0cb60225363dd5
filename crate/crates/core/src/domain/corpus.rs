use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ids::InspirationId;

/// A paper (title and abstract) that can be associated with a hypothesis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Inspiration {
    pub id: InspirationId,
    pub title: String,
    #[serde(rename = "abstract", default)]
    pub abstract_text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CorpusError {
    #[error("corpus is empty")]
    EmptyCorpus,
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("duplicate inspiration id {0}")]
    DuplicateId(InspirationId),
    #[error("inspiration {0} has an empty title")]
    EmptyTitle(InspirationId),
}

impl CorpusError {
    /// 1-based line the error refers to, when there is one.
    pub fn line(&self) -> Option<usize> {
        match self {
            CorpusError::Malformed { line, .. } => Some(*line),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InspirationCorpus {
    pub name: String,
    pub entries: Vec<Inspiration>,
}

impl InspirationCorpus {
    pub fn new(name: impl Into<String>, entries: Vec<Inspiration>) -> Result<Self, CorpusError> {
        let corpus = Self {
            name: name.into(),
            entries,
        };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.entries.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        let mut seen = HashSet::new();
        for entry in &self.entries {
            if !seen.insert(&entry.id) {
                return Err(CorpusError::DuplicateId(entry.id.clone()));
            }
            if entry.title.trim().is_empty() {
                return Err(CorpusError::EmptyTitle(entry.id.clone()));
            }
        }
        Ok(())
    }

    /// Parses line-delimited `{id, title, abstract}` records. Blank lines are skipped.
    pub fn parse_jsonl(name: impl Into<String>, body: &str) -> Result<Self, CorpusError> {
        let mut entries = Vec::new();
        let mut seen = HashSet::new();
        for (index, raw) in body.lines().enumerate() {
            let line = index + 1;
            if raw.trim().is_empty() {
                continue;
            }
            let entry: Inspiration =
                serde_json::from_str(raw).map_err(|e| CorpusError::Malformed {
                    line,
                    reason: e.to_string(),
                })?;
            if entry.id.as_str().trim().is_empty() {
                return Err(CorpusError::Malformed {
                    line,
                    reason: "empty id".into(),
                });
            }
            if entry.title.trim().is_empty() {
                return Err(CorpusError::Malformed {
                    line,
                    reason: "empty title".into(),
                });
            }
            if !seen.insert(entry.id.clone()) {
                return Err(CorpusError::Malformed {
                    line,
                    reason: format!("duplicate id {}", entry.id),
                });
            }
            entries.push(entry);
        }
        if entries.is_empty() {
            return Err(CorpusError::EmptyCorpus);
        }
        Ok(Self {
            name: name.into(),
            entries,
        })
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for entry in &self.entries {
            out.push_str(&serde_json::to_string(entry).expect("inspiration serializes"));
            out.push('\n');
        }
        out
    }

    pub fn get(&self, id: &InspirationId) -> Option<&Inspiration> {
        self.entries.iter().find(|e| &e.id == id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
