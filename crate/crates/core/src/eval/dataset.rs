use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::normalize;

/// One benchmark item: a question, its survey, and the reference hypothesis
/// broken into the elements recall is measured against.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroundTruthEntry {
    pub id: String,
    pub question: String,
    #[serde(default)]
    pub survey: String,
    pub fine_grained_hypothesis: String,
    pub elements: Vec<String>,
}

impl GroundTruthEntry {
    pub fn validate(&self) -> Result<(), String> {
        if self.id.trim().is_empty() {
            return Err("empty id".into());
        }
        if self.question.trim().is_empty() {
            return Err("empty question".into());
        }
        if self.elements.is_empty() {
            return Err("elements list is empty".into());
        }
        let mut seen = HashSet::new();
        for element in &self.elements {
            let key = normalize(element);
            if key.is_empty() {
                return Err("blank element".into());
            }
            if !seen.insert(key) {
                return Err(format!("duplicate element {element:?}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: {reason}")]
    MalformedEntry { line: usize, reason: String },
    #[error("dataset has no entries")]
    EmptyDataset,
    #[error("cannot read dataset: {0}")]
    Io(#[from] std::io::Error),
}

/// Parses line-delimited entries, keeping file order. Blank lines are skipped.
pub fn parse_dataset(body: &str) -> Result<Vec<GroundTruthEntry>, DatasetError> {
    let mut entries = Vec::new();
    let mut ids = HashSet::new();
    for (i, line) in body.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| DatasetError::MalformedEntry { line: i + 1, reason };
        let entry: GroundTruthEntry =
            serde_json::from_str(line).map_err(|e| malformed(e.to_string()))?;
        entry.validate().map_err(malformed)?;
        if !ids.insert(entry.id.clone()) {
            return Err(malformed(format!("duplicate id {}", entry.id)));
        }
        entries.push(entry);
    }
    if entries.is_empty() {
        return Err(DatasetError::EmptyDataset);
    }
    Ok(entries)
}

pub fn load_dataset(path: &Path) -> Result<Vec<GroundTruthEntry>, DatasetError> {
    parse_dataset(&std::fs::read_to_string(path)?)
}
