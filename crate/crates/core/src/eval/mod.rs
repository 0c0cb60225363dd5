//! Offline evaluation: a simulated navigator drives pipeline compositions
//! over a ground-truth dataset and recall is measured against each entry.

mod aggregate;
mod batch;
mod dataset;
mod oracle;
mod pipeline;
mod recall;

pub use aggregate::{aggregate, render_table, PipelineSummary};
pub use batch::{audit_feedback, run_batch, BatchError, BatchOptions, BatchOutcome, GatewayFactory};
pub use dataset::{load_dataset, parse_dataset, DatasetError, GroundTruthEntry};
pub use oracle::{
    leak_check, missing_elements, oracle_feedback, oracle_rank, oracle_rank_llm, redact,
    FeedbackStrength, LeakCheck, OracleError, LEAK_NGRAM, LEAK_RETRIES, NO_GAPS_FEEDBACK,
};
pub use pipeline::{
    find_pipeline, hint_blueprint, interpret, labels_match_events, run_pipeline,
    standard_pipelines, HarnessConfig, InterpretError, PipelineRow, PipelineSpec,
    PipelineSpecError, Ranking, RunOutput, RunReport, StageLabel,
};
pub use recall::{
    compute_recall, element_overlap, element_tokens, match_element, matched_elements,
    MATCH_THRESHOLD,
};
