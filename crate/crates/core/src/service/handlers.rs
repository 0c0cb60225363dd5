use std::convert::Infallible;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio_stream::wrappers::BroadcastStream;
use tokio_stream::{Stream, StreamExt};

use super::{tree_revision, ApiError, ApiSessionSummary, AppState, BusyGuard, ProgressKind, SessionSlot};
use crate::domain::{HypothesisNode, InspirationCorpus, NodeId, SessionId, Stage};
use crate::explore::ExploratoryEngine;
use crate::llm::LiveConfig;
use crate::protocol::{Chooser, EventPayload, ProtocolError, Session};
use crate::refine::{RefinementEngine, Scorer};

type AppResult<T> = Result<T, ApiError>;

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/corpora", post(upload_corpus))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}/tree", get(get_tree))
        .route("/sessions/{id}/ranking", get(get_ranking))
        .route("/sessions/{id}/act", post(act))
        .route("/sessions/{id}/events", get(events))
        .route("/sessions/{id}/export", get(export))
        .with_state(state)
}

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> AppResult<T> + Send + 'static) -> AppResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::internal(format!("worker failed: {e}")))?
}

async fn upload_corpus(State(state): State<Arc<AppState>>, body: Bytes) -> AppResult<Response> {
    let text = std::str::from_utf8(&body)
        .map_err(|e| ApiError::bad_request("MalformedCorpus", format!("body is not UTF-8: {e}")))?;
    let id = super::corpus_id(&body);
    if let Some(existing) = state.corpus(&id) {
        let body = json!({ "corpus_id": id, "entries": existing.len() });
        return Ok((StatusCode::OK, Json(body)).into_response());
    }
    let corpus = InspirationCorpus::parse_jsonl(id.clone(), text)?;
    state
        .store
        .put_corpus(&id, &body)
        .map_err(|e| ApiError::internal(format!("cannot store corpus: {e}")))?;
    let entries = corpus.len();
    state.corpora.write().expect("corpora lock").insert(id.clone(), Arc::new(corpus));
    Ok((StatusCode::CREATED, Json(json!({ "corpus_id": id, "entries": entries }))).into_response())
}

#[derive(Debug, Deserialize)]
struct CreateSession {
    question: String,
    #[serde(default)]
    survey: Option<String>,
    #[serde(default)]
    blueprint: Option<String>,
    corpus_id: String,
    #[serde(default)]
    llm_config: Option<LiveConfig>,
}

fn non_blank(value: Option<String>) -> Option<String> {
    value.filter(|v| !v.trim().is_empty())
}

async fn create_session(
    State(state): State<Arc<AppState>>,
    Json(body): Json<CreateSession>,
) -> AppResult<(StatusCode, Json<ApiSessionSummary>)> {
    if body.question.trim().is_empty() {
        return Err(ApiError::bad_request("EmptyQuestion", "research question is empty"));
    }
    let corpus = state
        .corpus(&body.corpus_id)
        .ok_or_else(|| ApiError::not_found("UnknownCorpus", format!("unknown corpus {}", body.corpus_id)))?;
    let gateway = state
        .provider
        .gateway(&body.llm_config.unwrap_or_default())
        .map_err(|e| ApiError::bad_request("InvalidLlmConfig", e))?;
    let session = Session::init(
        &body.question,
        non_blank(body.survey),
        non_blank(body.blueprint),
        corpus,
        state.ids.clone(),
    )?;
    let slot = SessionSlot::new(session.clone(), gateway);
    state.persist(&slot, &session)?;
    let summary = slot.summary();
    state
        .sessions
        .write()
        .expect("sessions lock")
        .insert(session.id().clone(), slot);
    Ok((StatusCode::CREATED, Json(summary)))
}

async fn list_sessions(State(state): State<Arc<AppState>>) -> Json<Vec<ApiSessionSummary>> {
    let sessions = state.sessions.read().expect("sessions lock");
    let mut out: Vec<ApiSessionSummary> = sessions.values().map(|s| s.summary()).collect();
    out.sort_by(|a, b| a.session_id.cmp(&b.session_id));
    Json(out)
}

#[derive(Serialize)]
struct TreeNodeView<'a> {
    #[serde(flatten)]
    node: &'a HypothesisNode,
    average: Option<f64>,
}

#[derive(Serialize)]
struct Edge<'a> {
    parent: &'a NodeId,
    child: &'a NodeId,
    stage: Stage,
    #[serde(skip_serializing_if = "Option::is_none")]
    inspiration: Option<&'a str>,
}

async fn get_tree(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> AppResult<Json<serde_json::Value>> {
    let snapshot = state.slot(&SessionId::new(id))?.snapshot();
    let tree = &snapshot.tree;
    let nodes: Vec<TreeNodeView> = tree
        .nodes()
        .map(|node| TreeNodeView {
            node,
            average: node.scores.as_ref().map(|s| s.average()),
        })
        .collect();
    let edges: Vec<Edge> = tree
        .nodes()
        .filter_map(|n| {
            n.parent.as_ref().map(|parent| Edge {
                parent,
                child: &n.id,
                stage: n.stage,
                inspiration: n.inspiration_used.as_ref().map(|i| i.as_str()),
            })
        })
        .collect();
    Ok(Json(json!({
        "session_id": snapshot.session_id,
        "revision": tree_revision(&snapshot),
        "root": tree.root_id(),
        "active": tree.active_id(),
        "stage_of_active": snapshot.stage_of_active,
        "nodes": nodes,
        "edges": edges,
    })))
}

#[derive(Debug, Deserialize)]
struct RankingQuery {
    #[serde(default)]
    scope: Option<String>,
}

fn json_response(status: StatusCode, body: String, cache: Option<&'static str>) -> Response {
    let mut response = (status, [(header::CONTENT_TYPE, "application/json")], body).into_response();
    if let Some(cache) = cache {
        response
            .headers_mut()
            .insert("x-moose-cache", header::HeaderValue::from_static(cache));
    }
    response
}

async fn get_ranking(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(query): Query<RankingQuery>,
) -> AppResult<Response> {
    let scope = query.scope.unwrap_or_else(|| "leaves".to_string());
    if scope != "leaves" && scope != "all" {
        return Err(ApiError::bad_request("InvalidScope", "scope must be leaves or all"));
    }
    let slot = state.slot(&SessionId::new(id))?;
    let revision = tree_revision(&slot.snapshot());
    let key = (revision, scope.clone());
    if let Some(body) = slot.ranking_cache.lock().expect("cache lock").get(&key) {
        return Ok(json_response(StatusCode::OK, body.clone(), Some("hit")));
    }
    let guard = slot.try_acquire().ok_or_else(ApiError::busy)?;
    let body = blocking(move || {
        let slot = guard.0.clone();
        let mut session = slot.session.lock().expect("session lock");
        let candidates: Vec<NodeId> = if scope == "all" {
            session.tree().nodes().map(|n| n.id.clone()).collect()
        } else {
            session.tree().leaves().into_iter().map(|n| n.id.clone()).collect()
        };
        let scorer = Scorer::new(&slot.gateway, state.settings.criteria.clone());
        let ranking = session.self_rank(&scorer, &candidates)?;
        state.persist(&slot, &session)?;
        let entries: Vec<serde_json::Value> = ranking
            .iter()
            .map(|r| json!({ "node": r.node, "average": r.average(), "scores": r.scores }))
            .collect();
        let body = json!({
            "session_id": session.id(),
            "scope": scope,
            "revision": revision,
            "ranking": entries,
        })
        .to_string();
        slot.ranking_cache.lock().expect("cache lock").insert(key, body.clone());
        drop(guard);
        Ok(body)
    })
    .await?;
    Ok(json_response(StatusCode::OK, body, Some("miss")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Deserialize)]
enum Next {
    Explore,
    Refine,
}

impl Next {
    fn stage(self) -> Stage {
        match self {
            Next::Explore => Stage::Exploratory,
            Next::Refine => Stage::FineGrained,
        }
    }
}

#[derive(Debug, Deserialize)]
struct ActBody {
    node: NodeId,
    #[serde(default)]
    feedback: Option<String>,
    next: Next,
}

async fn act(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<ActBody>,
) -> AppResult<(StatusCode, Json<serde_json::Value>)> {
    let slot = state.slot(&SessionId::new(id))?;
    if !slot.snapshot().tree.contains(&body.node) {
        return Err(ApiError::not_found("UnknownNode", format!("unknown node {}", body.node)));
    }
    let guard = slot.try_acquire().ok_or_else(ApiError::busy)?;
    let job_id = state.ids.next("job").0;
    let prepared = {
        let state = state.clone();
        let body_node = body.node.clone();
        blocking(move || {
            let slot = guard.0.clone();
            let mut session = slot.session.lock().expect("session lock");
            let before = session.events().len();
            let result = prepare(&mut session, &body_node, body.feedback.as_deref(), body.next.stage());
            if session.events().len() != before {
                state.persist(&slot, &session)?;
            }
            result?;
            Ok(guard)
        })
        .await?
    };
    let job = job_id.clone();
    tokio::task::spawn_blocking(move || run_job(&state, prepared, &job, &body.node, body.next));
    Ok((StatusCode::ACCEPTED, Json(json!({ "job_id": job_id }))))
}

fn prepare(session: &mut Session, node: &NodeId, feedback: Option<&str>, target: Stage) -> Result<(), ProtocolError> {
    if let Some(text) = feedback {
        session.apply_feedback_from(node, text, Some(Chooser::Human))?;
    }
    if session.state().effective_stage(node)? != target {
        session.route_from(node, target, Some(Chooser::Human))?;
    }
    Ok(())
}

fn run_job(state: &AppState, guard: BusyGuard, job_id: &str, node: &NodeId, next: Next) {
    let slot = guard.0.clone();
    slot.emit(ProgressKind::GenerationStarted, json!({ "job_id": job_id, "node": node, "next": format!("{next:?}") }));
    let mut session = slot.session.lock().expect("session lock");
    let before = session.events().len();
    let gateway = &slot.gateway;
    let result = match next {
        Next::Explore => session
            .explore(&ExploratoryEngine::new(gateway, state.settings.explore.clone()), node)
            .map(|_| ()),
        Next::Refine => {
            let scorer = Scorer::new(gateway, state.settings.criteria.clone());
            session
                .refine(&RefinementEngine::new(gateway, scorer, state.settings.refine.clone()), node)
                .map(|_| ())
        }
    };
    let mut persisted = Ok(());
    if session.events().len() != before {
        let event = session.events().last().expect("recorded").clone();
        let mut nodes: Vec<&HypothesisNode> = event.payload.new_nodes().iter().collect();
        nodes.sort_by(|a, b| a.id.cmp(&b.id));
        for n in nodes {
            slot.emit(ProgressKind::NodeAdded, json!({ "job_id": job_id, "node": n }));
            if let Some(scores) = &n.scores {
                slot.emit(
                    ProgressKind::ScoreReady,
                    json!({ "job_id": job_id, "node": n.id, "average": scores.average(), "scores": scores }),
                );
            }
        }
        if let EventPayload::RefineRun { start, start_score: Some(scores), .. } = &event.payload {
            slot.emit(
                ProgressKind::ScoreReady,
                json!({ "job_id": job_id, "node": start, "average": scores.average(), "scores": scores }),
            );
        }
        persisted = state.persist(&slot, &session);
    }
    drop(session);
    drop(guard);
    let outcome = result.map_err(|e| e.to_string()).and(persisted.map_err(|e| e.message));
    match outcome {
        Ok(()) => slot.emit(ProgressKind::RunCompleted, json!({ "job_id": job_id, "complete": true })),
        Err(message) => {
            tracing::warn!(job = job_id, %message, "job failed");
            slot.emit(ProgressKind::Error, json!({ "job_id": job_id, "message": message }));
        }
    }
}

async fn events(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> AppResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    let slot = state.slot(&SessionId::new(id))?;
    let stream = BroadcastStream::new(slot.progress.subscribe()).filter_map(|item| {
        let progress = item.ok()?;
        let event = Event::default()
            .event(format!("{:?}", progress.kind))
            .id(progress.seq.to_string())
            .json_data(&progress)
            .ok()?;
        Some(Ok(event))
    });
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

async fn export(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> AppResult<Response> {
    let snapshot = state.slot(&SessionId::new(id))?.snapshot();
    Ok(json_response(StatusCode::OK, snapshot.to_json(), None))
}
