//! HTTP API over sessions.
//!
//! Engine work runs as a background job per session; clients follow it on
//! the session's event stream. Each session admits one mutating operation
//! at a time and answers 409 to the rest.

mod error;
mod handlers;
mod provider;
mod store;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};
use tokio::sync::broadcast;

pub use error::ApiError;
pub use handlers::router;
pub use provider::{BackendProvider, LiveProvider, ScriptedProvider, SyntheticProvider};
pub use store::{corpus_id, Store};

use crate::domain::{IdGen, InspirationCorpus, NodeId, SessionId, Stage, DEFAULT_CRITERIA};
use crate::explore::ExploreConfig;
use crate::llm::{Gateway, LiveConfig};
use crate::protocol::{EventKind, Session, SessionExport};
use crate::refine::RefineConfig;

pub const DEFAULT_LISTEN_ADDR: &str = "127.0.0.1:8080";
pub const DEFAULT_DATA_DIR: &str = "moose-data";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EngineSettings {
    pub explore: ExploreConfig,
    pub refine: RefineConfig,
    pub criteria: Vec<String>,
}

impl Default for EngineSettings {
    fn default() -> Self {
        Self {
            explore: ExploreConfig::default(),
            refine: RefineConfig::default(),
            criteria: DEFAULT_CRITERIA.iter().map(|c| c.to_string()).collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProgressKind {
    GenerationStarted,
    NodeAdded,
    ScoreReady,
    RunCompleted,
    Error,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgressEvent {
    pub session_id: SessionId,
    /// Per-session emission counter.
    pub seq: u64,
    pub kind: ProgressKind,
    pub payload: serde_json::Value,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ApiSessionSummary {
    pub session_id: SessionId,
    pub question: String,
    pub node_count: usize,
    pub active: NodeId,
    pub stage_of_active: Stage,
    pub created: u64,
    pub updated: u64,
    /// A job or ranking is in flight; mutating calls answer 409 until it ends.
    #[serde(default)]
    pub busy: bool,
}

impl ApiSessionSummary {
    pub fn of(export: &SessionExport) -> Self {
        Self {
            session_id: export.session_id.clone(),
            question: export.base.question.clone(),
            node_count: export.tree.len(),
            active: export.tree.active_id().clone(),
            stage_of_active: export.stage_of_active,
            created: export.events.first().map_or(0, |e| e.timestamp),
            updated: export.events.last().map_or(0, |e| e.timestamp),
            busy: false,
        }
    }
}

/// Tree revision: events that can change what ranking sees. Self-ranking
/// only attaches scores, so it does not advance the revision.
pub fn tree_revision(export: &SessionExport) -> usize {
    export.events.iter().filter(|e| e.kind() != EventKind::SelfRanked).count()
}

pub(crate) struct SessionSlot {
    session: Mutex<Session>,
    snapshot: RwLock<Arc<SessionExport>>,
    gateway: Arc<Gateway>,
    busy: AtomicBool,
    seq: AtomicU64,
    progress: broadcast::Sender<ProgressEvent>,
    ranking_cache: Mutex<HashMap<(usize, String), String>>,
}

/// Holds a session's busy flag; clears it when dropped.
pub(crate) struct BusyGuard(Arc<SessionSlot>);

impl Drop for BusyGuard {
    fn drop(&mut self) {
        self.0.busy.store(false, Ordering::SeqCst);
    }
}

impl SessionSlot {
    fn new(session: Session, gateway: Gateway) -> Arc<Self> {
        let (progress, _) = broadcast::channel(1024);
        Arc::new(Self {
            snapshot: RwLock::new(Arc::new(session.export())),
            session: Mutex::new(session),
            gateway: Arc::new(gateway),
            busy: AtomicBool::new(false),
            seq: AtomicU64::new(0),
            progress,
            ranking_cache: Mutex::new(HashMap::new()),
        })
    }

    pub(crate) fn summary(&self) -> ApiSessionSummary {
        ApiSessionSummary {
            busy: self.busy.load(Ordering::SeqCst),
            ..ApiSessionSummary::of(&self.snapshot())
        }
    }

    pub(crate) fn snapshot(&self) -> Arc<SessionExport> {
        self.snapshot.read().expect("snapshot lock").clone()
    }

    pub(crate) fn try_acquire(self: &Arc<Self>) -> Option<BusyGuard> {
        self.busy
            .compare_exchange(false, true, Ordering::SeqCst, Ordering::SeqCst)
            .ok()
            .map(|_| BusyGuard(self.clone()))
    }

    pub(crate) fn emit(&self, kind: ProgressKind, payload: serde_json::Value) {
        let event = ProgressEvent {
            session_id: self.snapshot().session_id.clone(),
            seq: self.seq.fetch_add(1, Ordering::SeqCst),
            kind,
            payload,
        };
        // no subscribers is fine
        let _ = self.progress.send(event);
    }
}

/// Shared service state.
pub struct AppState {
    store: Store,
    provider: Arc<dyn BackendProvider>,
    settings: EngineSettings,
    ids: IdGen,
    corpora: RwLock<HashMap<String, Arc<InspirationCorpus>>>,
    sessions: RwLock<HashMap<SessionId, Arc<SessionSlot>>>,
    /// Session files that failed to restore, with the reason.
    corrupt: RwLock<HashMap<SessionId, String>>,
}

impl AppState {
    /// Opens the data directory and restores every stored corpus and
    /// session. Sessions whose log does not replay are refused and
    /// reported as corrupt on access.
    pub fn open(
        data_dir: impl Into<PathBuf>,
        provider: Arc<dyn BackendProvider>,
        settings: EngineSettings,
        ids: IdGen,
    ) -> std::io::Result<Arc<Self>> {
        let store = Store::open(data_dir)?;
        let state = Self {
            store,
            provider,
            settings,
            ids,
            corpora: RwLock::new(HashMap::new()),
            sessions: RwLock::new(HashMap::new()),
            corrupt: RwLock::new(HashMap::new()),
        };
        for (id, path) in state.store.corpora()? {
            let body = std::fs::read_to_string(&path)?;
            match InspirationCorpus::parse_jsonl(id.clone(), &body) {
                Ok(corpus) => {
                    state.corpora.write().expect("corpora lock").insert(id, Arc::new(corpus));
                }
                Err(e) => tracing::warn!(corpus = %id, error = %e, "skipping unreadable corpus"),
            }
        }
        for (id, path) in state.store.sessions()? {
            let id = SessionId::new(id);
            let body = std::fs::read_to_string(&path)?;
            match state.restore(&body) {
                Ok(slot) => {
                    state.sessions.write().expect("sessions lock").insert(id, slot);
                }
                Err(reason) => {
                    tracing::error!(session = %id, %reason, "refusing corrupt session");
                    state.corrupt.write().expect("corrupt lock").insert(id, reason);
                }
            }
        }
        Ok(Arc::new(state))
    }

    fn restore(&self, body: &str) -> Result<Arc<SessionSlot>, String> {
        let export: SessionExport = serde_json::from_str(body).map_err(|e| format!("unreadable export: {e}"))?;
        let corpus = self
            .corpus(&export.base.corpus_ref)
            .ok_or_else(|| format!("corpus {} is missing", export.base.corpus_ref))?;
        let session = Session::restore(&export, corpus, self.ids.clone()).map_err(|e| e.to_string())?;
        let gateway = self.provider.gateway(&LiveConfig::default())?;
        Ok(SessionSlot::new(session, gateway))
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn settings(&self) -> &EngineSettings {
        &self.settings
    }

    pub(crate) fn corpus(&self, id: &str) -> Option<Arc<InspirationCorpus>> {
        self.corpora.read().expect("corpora lock").get(id).cloned()
    }

    pub(crate) fn slot(&self, id: &SessionId) -> Result<Arc<SessionSlot>, ApiError> {
        if let Some(slot) = self.sessions.read().expect("sessions lock").get(id) {
            return Ok(slot.clone());
        }
        if let Some(reason) = self.corrupt.read().expect("corrupt lock").get(id) {
            return Err(ApiError::new(
                axum::http::StatusCode::INTERNAL_SERVER_ERROR,
                "CorruptSession",
                reason.clone(),
            ));
        }
        Err(ApiError::not_found("UnknownSession", format!("unknown session {id}")))
    }

    /// Writes the session's current export and publishes it as the snapshot.
    pub(crate) fn persist(&self, slot: &SessionSlot, session: &Session) -> Result<(), ApiError> {
        let export = session.export();
        self.store
            .put_session(export.session_id.as_str(), &export.to_json())
            .map_err(|e| ApiError::internal(format!("cannot persist session: {e}")))?;
        *slot.snapshot.write().expect("snapshot lock") = Arc::new(export);
        Ok(())
    }
}

/// Listen address and data directory, from `MOOSE_LISTEN_ADDR` and
/// `MOOSE_DATA_DIR` when set.
#[derive(Clone, Debug)]
pub struct ServeConfig {
    pub listen: SocketAddr,
    pub data_dir: PathBuf,
}

impl ServeConfig {
    pub fn from_env() -> Result<Self, String> {
        let listen = std::env::var("MOOSE_LISTEN_ADDR").unwrap_or_else(|_| DEFAULT_LISTEN_ADDR.to_string());
        Ok(Self {
            listen: listen.parse().map_err(|e| format!("MOOSE_LISTEN_ADDR {listen:?}: {e}"))?,
            data_dir: std::env::var_os("MOOSE_DATA_DIR").map_or_else(|| DEFAULT_DATA_DIR.into(), PathBuf::from),
        })
    }
}

pub async fn serve(state: Arc<AppState>, listen: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(listen).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
