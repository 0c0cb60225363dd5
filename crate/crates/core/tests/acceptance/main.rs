//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

#[path = "../common/mod.rs"]
mod common;

mod chain;
mod disclosure;
mod grammar;
mod pipelines;
mod recall;
mod refinement;
mod service;
mod support;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

type Criterion = (&'static str, fn() -> Result<String, String>);

const CRITERIA: &[Criterion] = &[
    ("protocol grammar", grammar::check),
    ("inspiration chain", chain::check),
    ("hierarchical refinement contract", refinement::check),
    ("recall metric", recall::check),
    ("non-disclosure", disclosure::check),
    ("pipeline composition fidelity", pipelines::composition),
    ("step accounting", pipelines::accounting),
    ("determinism and persistence", pipelines::determinism),
    ("service contract", service::check),
];

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    let mut ran = 0;
    for (name, check) in CRITERIA {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        ran += 1;
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let message = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into());
            Err(message)
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS  {name} ({secs:.2}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name} ({secs:.2}s): {detail}");
            }
        }
    }
    println!("{} of {ran} criteria passed", ran - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
