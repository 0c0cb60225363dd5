#![allow(dead_code)]

use std::sync::Arc;

use moose_core::domain::{Inspiration, InspirationCorpus, InspirationId};
use moose_core::eval::GroundTruthEntry;
use moose_core::llm::{Gateway, RetryPolicy, SyntheticBackend};

pub fn corpus() -> Arc<InspirationCorpus> {
    let papers = [
        ("p1", "Visible light photoredox catalysis", "Photocatalysts absorb visible light to drive redox steps."),
        ("p2", "Ionic liquids as green solvents", "Low volatility solvents that stabilise charged intermediates."),
        ("p3", "Palladium cross coupling", "Palladium complexes couple aryl halides with nucleophiles."),
        ("p4", "Continuous flow reactors", "Flow chemistry improves heat and mass transfer."),
        ("p5", "Copper mediated amination", "Copper salts promote carbon nitrogen bond formation."),
        ("p6", "Enzyme cascades", "Multiple enzymes in one pot perform sequential transformations."),
    ];
    Arc::new(
        InspirationCorpus::new(
            "fixture",
            papers
                .iter()
                .map(|(id, title, abs)| Inspiration {
                    id: InspirationId::new(*id),
                    title: title.to_string(),
                    abstract_text: abs.to_string(),
                })
                .collect(),
        )
        .unwrap(),
    )
}

pub fn entries() -> Vec<GroundTruthEntry> {
    vec![
        GroundTruthEntry {
            id: "chem-1".into(),
            question: "How can aryl amination be made greener?".into(),
            survey: "Amination reactions often need harsh conditions. Photoredox methods are emerging. Solvent choice matters.".into(),
            fine_grained_hypothesis: "A palladium catalyst under visible light in an ionic liquid couples aryl bromides with amines at room temperature.".into(),
            elements: vec![
                "palladium catalyst under visible light".into(),
                "ionic liquid solvent".into(),
                "room temperature coupling of aryl bromides".into(),
            ],
        },
        GroundTruthEntry {
            id: "chem-2".into(),
            question: "How can enzymatic cascades be scaled?".into(),
            survey: "Cascades avoid isolation of intermediates. Scale-up is limited by enzyme stability.".into(),
            fine_grained_hypothesis: "Immobilised enzymes packed in a continuous flow reactor run a two step cascade with cofactor recycling.".into(),
            elements: vec![
                "immobilised enzymes".into(),
                "continuous flow reactor".into(),
                "cofactor recycling".into(),
            ],
        },
    ]
}

pub fn synthetic(seed: u64) -> Gateway {
    Gateway::new(Arc::new(SyntheticBackend::new(seed))).with_retry(RetryPolicy::immediate())
}
