//! Recall agrees with an independently computed table and hits its exact
//! boundaries.

use moose_core::eval::{compute_recall, match_element, GroundTruthEntry};
use serde::Deserialize;

use super::common;
use crate::ensure;

#[derive(Deserialize)]
struct Case {
    name: String,
    hypothesis: String,
    elements: Vec<String>,
    matched: Vec<bool>,
    recall_num: u32,
    recall_den: u32,
}

fn entry(elements: Vec<String>) -> GroundTruthEntry {
    GroundTruthEntry {
        id: "case".into(),
        question: "q?".into(),
        survey: String::new(),
        fine_grained_hypothesis: elements.join(" "),
        elements,
    }
}

pub fn check() -> Result<String, String> {
    let body = include_str!("../fixtures/recall_cases.json");
    let cases: Vec<Case> = serde_json::from_str(body).map_err(|e| e.to_string())?;
    for case in &cases {
        for (element, expected) in case.elements.iter().zip(&case.matched) {
            let got = match_element(&case.hypothesis, element);
            ensure!(got == *expected, "{}: element {element:?} matched={got}, oracle says {expected}", case.name);
        }
        let recall = compute_recall(&case.hypothesis, &entry(case.elements.clone()));
        let want = f64::from(case.recall_num) / f64::from(case.recall_den);
        ensure!((recall - want).abs() < 1e-9, "{}: recall {recall}, oracle {want}", case.name);
    }
    for truth in common::entries() {
        let empty = compute_recall("", &truth);
        ensure!(empty == 0.0, "{}: empty hypothesis scored {empty}", truth.id);
        let all = compute_recall(&truth.elements.join(". "), &truth);
        ensure!(all == 1.0, "{}: concatenated elements scored {all}", truth.id);
    }
    Ok(format!("{} frozen cases agree; empty scores 0 and concatenation scores 1", cases.len()))
}
