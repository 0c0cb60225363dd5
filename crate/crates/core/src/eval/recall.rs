//! Deterministic token-overlap matcher.

use std::collections::BTreeSet;

use super::dataset::GroundTruthEntry;
use crate::text::{content_tokens, tokens};

/// An element is recovered when at least this share of its distinct content
/// tokens occurs in the hypothesis.
pub const MATCH_THRESHOLD: f64 = 0.70;

/// Distinct content tokens of an element; falls back to all tokens when the
/// element consists only of stopwords.
pub fn element_tokens(element: &str) -> BTreeSet<String> {
    let content = content_tokens(element);
    if content.is_empty() {
        tokens(element).into_iter().collect()
    } else {
        content
    }
}

/// `(present, total)` content tokens of `element` found in `hypothesis`.
pub fn element_overlap(hypothesis: &str, element: &str) -> (usize, usize) {
    let wanted = element_tokens(element);
    let have: BTreeSet<String> = tokens(hypothesis).into_iter().collect();
    (wanted.iter().filter(|t| have.contains(*t)).count(), wanted.len())
}

pub fn match_element(hypothesis: &str, element: &str) -> bool {
    let (present, total) = element_overlap(hypothesis, element);
    // present / total >= 0.70 in integer arithmetic
    total > 0 && present * 100 >= total * 70
}

pub fn matched_elements<'e>(hypothesis: &str, entry: &'e GroundTruthEntry) -> Vec<&'e str> {
    entry
        .elements
        .iter()
        .filter(|e| match_element(hypothesis, e))
        .map(String::as_str)
        .collect()
}

pub fn compute_recall(hypothesis: &str, entry: &GroundTruthEntry) -> f64 {
    matched_elements(hypothesis, entry).len() as f64 / entry.elements.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn entry(elements: &[&str]) -> GroundTruthEntry {
        GroundTruthEntry {
            id: "t".into(),
            question: "q".into(),
            survey: String::new(),
            fine_grained_hypothesis: elements.join(". "),
            elements: elements.iter().map(|e| e.to_string()).collect(),
        }
    }

    #[test]
    fn paraphrase_with_all_content_tokens_matches() {
        assert_eq!(
            element_overlap(
                "We use a palladium catalyst activated by visible light.",
                "palladium catalyst under visible light"
            ),
            (4, 4)
        );
        assert!(match_element(
            "We use a palladium catalyst activated by visible light.",
            "palladium catalyst under visible light"
        ));
    }

    #[test]
    fn disjoint_and_verbatim() {
        assert!(!match_element("entirely unrelated words", "palladium catalyst"));
        assert!(match_element("xx palladium catalyst yy", "palladium catalyst"));
    }

    #[test]
    fn threshold_boundary() {
        // 7 of 10 matches, 6 of 10 does not
        let element = "a1 a2 a3 a4 a5 a6 a7 a8 a9 a10";
        assert!(match_element("a1 a2 a3 a4 a5 a6 a7", element));
        assert!(!match_element("a1 a2 a3 a4 a5 a6", element));
    }

    #[test]
    fn recall_arithmetic() {
        let e = entry(&["ionic liquid solvent", "copper catalyst", "flow reactor"]);
        assert!((compute_recall("copper catalyst in a flow reactor", &e) - 2.0 / 3.0).abs() < 1e-9);
        assert_eq!(compute_recall("", &e), 0.0);
        assert_eq!(compute_recall(&e.elements.join(" "), &e), 1.0);
    }

    proptest! {
        #[test]
        fn recall_bounded_and_monotone(
            words in prop::collection::vec("[a-z]{2,6}", 1..20),
            split in 1usize..5,
            extra in "[a-z ]{0,40}",
        ) {
            let chunks: Vec<String> = words.chunks(split).map(|c| c.join(" ")).collect();
            let mut unique = Vec::new();
            for c in chunks {
                if !unique.iter().any(|u: &String| crate::text::normalize(u) == crate::text::normalize(&c)) {
                    unique.push(c);
                }
            }
            let refs: Vec<&str> = unique.iter().map(String::as_str).collect();
            let e = entry(&refs);
            let r = compute_recall(&extra, &e);
            prop_assert!((0.0..=1.0).contains(&r));
            for element in &e.elements {
                let extended = format!("{extra} {element}");
                prop_assert!(compute_recall(&extended, &e) >= r);
            }
            prop_assert_eq!(compute_recall(&e.elements.join(" "), &e), 1.0);
        }
    }
}
