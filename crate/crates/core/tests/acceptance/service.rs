//! HTTP contract against a live server backed by scripted replies.

use std::sync::Arc;
use std::time::Duration;

use moose_core::domain::IdGen;
use moose_core::llm::{Backend, BackendError, BackendReply, BackendRequest, Gateway, LiveConfig, ScriptedBackend};
use moose_core::service::{router, AppState, BackendProvider, EngineSettings, ScriptedProvider};
use serde_json::{json, Value};

use super::common;
use super::support;
use crate::ensure;

const HAMMER: usize = 16;

struct Server {
    base: String,
    client: reqwest::Client,
}

type Reply = Result<(u16, Value), String>;

impl Server {
    async fn start(dir: &std::path::Path, provider: Arc<dyn BackendProvider>) -> Result<Self, String> {
        let state = AppState::open(dir, provider, EngineSettings::default(), IdGen::system()).map_err(|e| e.to_string())?;
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.map_err(|e| e.to_string())?;
        let addr = listener.local_addr().map_err(|e| e.to_string())?;
        tokio::spawn(async move { axum::serve(listener, router(state)).await });
        Ok(Self { base: format!("http://{addr}"), client: reqwest::Client::new() })
    }

    async fn send(&self, request: reqwest::RequestBuilder) -> Reply {
        let r = request.send().await.map_err(|e| e.to_string())?;
        Ok((r.status().as_u16(), r.json().await.unwrap_or(Value::Null)))
    }

    async fn get(&self, path: &str) -> Reply {
        self.send(self.client.get(format!("{}{path}", self.base))).await
    }

    async fn post(&self, path: &str, body: Value) -> Reply {
        self.send(self.client.post(format!("{}{path}", self.base)).json(&body)).await
    }

    async fn session(&self) -> Result<(String, String), String> {
        let (_, corpus) = self.send(self.client.post(format!("{}/corpora", self.base)).body(common::corpus().to_jsonl())).await?;
        let (status, s) = self.post("/sessions", json!({"question": "How can amination be greener?", "corpus_id": corpus["corpus_id"]})).await?;
        ensure!(status == 201, "create session returned {status}");
        Ok((s["session_id"].as_str().unwrap_or_default().into(), s["active"].as_str().unwrap_or_default().into()))
    }

    async fn wait_idle(&self, id: &str, events_before: usize) -> Result<Value, String> {
        for _ in 0..1000 {
            let (_, list) = self.get("/sessions").await?;
            let busy = list.as_array().into_iter().flatten().any(|s| s["session_id"] == id && s["busy"] == true);
            let (_, export) = self.get(&format!("/sessions/{id}/export")).await?;
            if !busy && export["events"].as_array().map_or(0, Vec::len) > events_before {
                return Ok(export);
            }
            tokio::time::sleep(Duration::from_millis(10)).await;
        }
        Err("job did not finish".into())
    }
}

/// Scripted replies after a delay so a job stays in flight.
struct Slow(ScriptedBackend);

impl Backend for Slow {
    fn name(&self) -> &str {
        "slow-scripted"
    }

    fn generate(&self, request: &BackendRequest<'_>) -> Result<BackendReply, BackendError> {
        std::thread::sleep(Duration::from_millis(40));
        self.0.generate(request)
    }
}

async fn happy_and_error_paths() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let s = Server::start(dir.path(), Arc::new(ScriptedProvider(support::pipeline_script()))).await?;
    let (id, root) = s.session().await?;

    ensure!(s.post("/sessions", json!({"question": " ", "corpus_id": "x"})).await?.0 == 400, "blank question accepted");
    ensure!(s.post("/sessions", json!({"question": "q?", "corpus_id": "corpus-none"})).await?.0 == 404, "unknown corpus accepted");

    let (status, job) = s.post(&format!("/sessions/{id}/act"), json!({"node": root, "next": "Explore"})).await?;
    ensure!(status == 202 && job["job_id"].is_string(), "act returned {status}");
    s.wait_idle(&id, 1).await?;
    let (status, tree) = s.get(&format!("/sessions/{id}/tree")).await?;
    let nodes = tree["nodes"].as_array().map_or(0, Vec::len);
    let edges = tree["edges"].as_array().map_or(0, Vec::len);
    ensure!(status == 200 && nodes == 4 && edges == 3, "tree has {nodes} nodes and {edges} edges");

    let url = format!("{}/sessions/{id}/ranking?scope=leaves", s.base);
    let first = s.client.get(&url).send().await.map_err(|e| e.to_string())?;
    ensure!(first.status() == 200 && first.headers()["x-moose-cache"] == "miss", "first ranking {}", first.status());
    let body = first.text().await.map_err(|e| e.to_string())?;
    let second = s.client.get(&url).send().await.map_err(|e| e.to_string())?;
    ensure!(second.headers()["x-moose-cache"] == "hit", "second ranking was not cached");
    ensure!(second.text().await.map_err(|e| e.to_string())? == body, "cached ranking differs");
    let ranked: Value = serde_json::from_str(&body).map_err(|e| e.to_string())?;
    ensure!(ranked["ranking"].as_array().map_or(0, Vec::len) == 3, "ranking covers the wrong nodes");
    ensure!(s.get(&format!("/sessions/{id}/ranking?scope=sideways")).await?.0 == 400, "bad scope accepted");

    ensure!(s.post(&format!("/sessions/{id}/act"), json!({"node": "n-none", "next": "Explore"})).await?.0 == 404, "unknown node accepted");
    ensure!(s.post("/sessions/s-none/act", json!({"node": root, "next": "Explore"})).await?.0 == 404, "unknown session accepted");
    ensure!(s.get("/sessions/s-none/tree").await?.0 == 404, "unknown session tree served");

    let leaf = tree["edges"][0]["child"].as_str().unwrap_or_default().to_string();
    ensure!(s.post(&format!("/sessions/{id}/act"), json!({"node": leaf, "next": "Refine"})).await?.0 == 202, "refine refused");
    let export = s.wait_idle(&id, 2).await?;
    let last = export["events"].as_array().and_then(|e| e.last()).map(|e| e["payload"]["kind"].clone());
    ensure!(last == Some(json!("refine_run")), "refine did not record a run: {last:?}");
    Ok(())
}

async fn hammer() -> Result<(), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let provider = |_: &LiveConfig| Ok(Gateway::new(Arc::new(Slow(support::pipeline_script().build()))));
    let s = Arc::new(Server::start(dir.path(), Arc::new(provider)).await?);
    let (id, root) = s.session().await?;
    let mut handles = Vec::new();
    for _ in 0..HAMMER {
        let (s, id, root) = (s.clone(), id.clone(), root.clone());
        handles.push(tokio::spawn(async move { s.post(&format!("/sessions/{id}/act"), json!({"node": root, "next": "Explore"})).await }));
    }
    let mut codes = Vec::new();
    for h in handles {
        codes.push(h.await.map_err(|e| e.to_string())??.0);
    }
    let accepted = codes.iter().filter(|c| **c == 202).count();
    let busy = codes.iter().filter(|c| **c == 409).count();
    ensure!(accepted == 1 && busy == HAMMER - 1, "codes {codes:?}");
    s.wait_idle(&id, 1).await?;
    Ok(())
}

pub fn check() -> Result<String, String> {
    let runtime = tokio::runtime::Builder::new_multi_thread().enable_all().build().map_err(|e| e.to_string())?;
    runtime.block_on(async {
        happy_and_error_paths().await?;
        hammer().await
    })?;
    Ok(format!("create/act/tree/ranking paths hold; {HAMMER} concurrent acts admitted exactly one"))
}
