use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use moose_core::domain::{IdGen, InspirationCorpus};
use moose_core::eval::{
    find_pipeline, load_dataset, render_table, run_batch, standard_pipelines, BatchOptions,
    HarnessConfig,
};
use moose_core::llm::{Gateway, LiveBackend, LiveConfig, Script, ScriptedBackend, SyntheticBackend};
use moose_core::service::{
    self, AppState, BackendProvider, EngineSettings, LiveProvider, ScriptedProvider, ServeConfig,
    SyntheticProvider,
};

#[derive(Parser)]
#[command(name = "moose", version, about = "Human-steered hypothesis discovery")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run pipelines over a ground-truth dataset with a simulated navigator.
    Eval(EvalArgs),
    /// Serve the HTTP API. Reads MOOSE_LISTEN_ADDR and MOOSE_DATA_DIR.
    Serve {
        #[arg(long, default_value = "live")]
        backend: BackendSpec,
    },
    /// List the standard pipeline rows.
    Pipelines,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[arg(long)]
    corpus: PathBuf,
    /// Pipeline name, or `all` for every standard row.
    #[arg(long, default_value = "all")]
    pipeline: String,
    /// `live`, `scripted:<path>` or `synthetic[:<seed>]`.
    #[arg(long, default_value = "live")]
    backend: BackendSpec,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 3)]
    explore_rounds: usize,
}

#[derive(Clone, Debug)]
enum BackendSpec {
    Live,
    Scripted(PathBuf),
    Synthetic(u64),
}

impl FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "live" => Ok(Self::Live),
            None if s == "synthetic" => Ok(Self::Synthetic(0)),
            Some(("scripted", path)) if !path.is_empty() => Ok(Self::Scripted(path.into())),
            Some(("synthetic", seed)) => seed.parse().map(Self::Synthetic).map_err(|e| format!("bad seed: {e}")),
            _ => Err(format!("unknown backend {s:?}; expected live, scripted:<path> or synthetic[:<seed>]")),
        }
    }
}

fn eval(args: EvalArgs) -> Result<ExitCode> {
    let EvalArgs { dataset, corpus, pipeline, backend, out, workers, seed, explore_rounds } = args;
    let entries = load_dataset(&dataset).with_context(|| format!("loading {}", dataset.display()))?;
    let body = std::fs::read_to_string(&corpus).with_context(|| format!("reading {}", corpus.display()))?;
    let name = corpus.file_stem().map_or("corpus".into(), |s| s.to_string_lossy().into_owned());
    let corpus = Arc::new(InspirationCorpus::parse_jsonl(name, &body)?);
    let specs = if pipeline == "all" {
        standard_pipelines().into_iter().map(|r| r.spec).collect()
    } else {
        match find_pipeline(&pipeline) {
            Some(row) => vec![row.spec],
            None => bail!("unknown pipeline {pipeline}; run `moose pipelines` for the list"),
        }
    };
    let script = match &backend {
        BackendSpec::Scripted(path) => Some(std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?),
        _ => None,
    };
    let factory = move || -> Result<(Gateway, Option<Gateway>), String> {
        let gateway = match &backend {
            BackendSpec::Live => Gateway::new(Arc::new(LiveBackend::new(LiveConfig::from_env()).map_err(|e| e.to_string())?)),
            BackendSpec::Scripted(_) => {
                let body = script.as_deref().expect("script loaded");
                Gateway::new(Arc::new(ScriptedBackend::from_jsonl(body).map_err(|e| e.to_string())?))
            }
            BackendSpec::Synthetic(seed) => Gateway::new(Arc::new(SyntheticBackend::new(*seed))),
        };
        Ok((gateway, None))
    };
    let config = HarnessConfig {
        explore_rounds,
        seed,
        ..HarnessConfig::default()
    };
    let outcome = run_batch(
        &entries,
        corpus,
        &specs,
        &config,
        &factory,
        &BatchOptions { workers, out_dir: Some(out.clone()) },
    )?;
    print!("{}", render_table(&outcome.summaries));
    let incomplete: Vec<_> = outcome.reports.iter().filter(|r| !r.complete).collect();
    for r in &incomplete {
        eprintln!("incomplete: {} on {}: {}", r.pipeline, r.entry_id, r.error.as_deref().unwrap_or("unknown error"));
    }
    println!("results written to {}", out.display());
    Ok(if incomplete.is_empty() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn serve(backend: BackendSpec) -> Result<ExitCode> {
    let config = ServeConfig::from_env().map_err(anyhow::Error::msg)?;
    let provider: Arc<dyn BackendProvider> = match backend {
        BackendSpec::Live => Arc::new(LiveProvider),
        BackendSpec::Synthetic(seed) => Arc::new(SyntheticProvider(seed)),
        BackendSpec::Scripted(path) => {
            let body = std::fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            Arc::new(ScriptedProvider(Script::from_jsonl(&body)?))
        }
    };
    let state = AppState::open(&config.data_dir, provider, EngineSettings::default(), IdGen::system())
        .with_context(|| format!("opening {}", config.data_dir.display()))?;
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(service::serve(state, config.listen))?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .with_writer(std::io::stderr)
        .init();
    let result = match Cli::parse().command {
        Command::Eval(args) => eval(args),
        Command::Serve { backend } => serve(backend),
        Command::Pipelines => {
            for row in standard_pipelines() {
                println!("{:<42} {}", row.spec.name, row.description);
            }
            Ok(ExitCode::SUCCESS)
        }
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(2)
    })
}
