//! C ABI over the core engine.
//!
//! Objects cross the boundary as opaque handles that the caller frees with
//! the matching `*_free` function. Every call returns a [`MooseStatus`];
//! on failure a message is available from [`moose_last_error`] on the same
//! thread. Strings returned through out-parameters are owned by the caller
//! and released with [`moose_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::sync::Arc;

use moose_core::domain::{IdGen, InspirationCorpus, NodeId, Stage};
use moose_core::eval::{compute_recall, leak_check, GroundTruthEntry};
use moose_core::explore::{ExploreConfig, ExploratoryEngine};
use moose_core::llm::{Gateway, LiveBackend, LiveConfig, ScriptedBackend, SyntheticBackend};
use moose_core::protocol::{validate_trace, ProtocolError, Session, SessionExport};
use moose_core::refine::{RefineConfig, RefinementEngine, Scorer};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MooseStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    NotFound = 4,
    StageMismatch = 5,
    Backend = 6,
    Corrupt = 7,
    Incomplete = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MooseStage {
    Exploratory = 0,
    FineGrained = 1,
}

impl From<MooseStage> for Stage {
    fn from(s: MooseStage) -> Self {
        match s {
            MooseStage::Exploratory => Stage::Exploratory,
            MooseStage::FineGrained => Stage::FineGrained,
        }
    }
}

/// A parsed inspiration corpus.
pub struct MooseCorpus(Arc<InspirationCorpus>);

/// A session together with the model backend it calls.
pub struct MooseSession {
    session: Session,
    gateway: Gateway,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(MooseStatus, String);

type FfiResult<T> = Result<T, Failure>;

fn fail<T>(status: MooseStatus, message: impl Into<String>) -> FfiResult<T> {
    Err(Failure(status, message.into()))
}

impl From<ProtocolError> for Failure {
    fn from(e: ProtocolError) -> Self {
        let status = match &e {
            _ if e.is_unknown_node() => MooseStatus::NotFound,
            ProtocolError::StageMismatch { .. } | ProtocolError::Trace(_) => MooseStatus::StageMismatch,
            ProtocolError::CorruptSession(_) => MooseStatus::Corrupt,
            ProtocolError::RefineIncomplete(_) => MooseStatus::Incomplete,
            ProtocolError::Explore(_) | ProtocolError::Scoring(_) => MooseStatus::Backend,
            _ => MooseStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(message: &str) {
    let text = CString::new(message.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(text));
}

/// Runs `f`, recording any error or panic as the thread's last error.
fn guard(f: impl FnOnce() -> FfiResult<()>) -> MooseStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MooseStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(&message);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MooseStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return fail(MooseStatus::NullPointer, format!("{what} is null"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(MooseStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn optional_text(p: *const c_char, what: &str) -> FfiResult<Option<String>> {
    if p.is_null() {
        Ok(None)
    } else {
        text(p, what).map(|s| Some(s.to_string()))
    }
}

unsafe fn write_out<T>(out: *mut T, value: T) -> FfiResult<()> {
    if out.is_null() {
        return fail(MooseStatus::NullPointer, "output pointer is null");
    }
    out.write(value);
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, value: String) -> FfiResult<()> {
    let c = CString::new(value).or_else(|_| fail(MooseStatus::InvalidArgument, "string contains a nul byte"))?;
    write_out(out, c.into_raw())
}

unsafe fn session_mut<'a>(p: *mut MooseSession) -> FfiResult<&'a mut MooseSession> {
    p.as_mut().map_or_else(|| fail(MooseStatus::NullPointer, "session is null"), Ok)
}

fn gateway_for(spec: &str) -> FfiResult<Gateway> {
    let backend: Arc<dyn moose_core::llm::Backend> = match spec.split_once(':') {
        None if spec == "live" => Arc::new(
            LiveBackend::new(LiveConfig::from_env()).or_else(|e| fail(MooseStatus::Backend, e.to_string()))?,
        ),
        None if spec == "synthetic" => Arc::new(SyntheticBackend::new(0)),
        Some(("synthetic", seed)) => Arc::new(SyntheticBackend::new(
            seed.parse().or_else(|_| fail(MooseStatus::InvalidArgument, "synthetic seed is not a number"))?,
        )),
        Some(("scripted", path)) => {
            let body = std::fs::read_to_string(path)
                .or_else(|e| fail(MooseStatus::InvalidArgument, format!("cannot read script {path}: {e}")))?;
            Arc::new(ScriptedBackend::from_jsonl(&body).or_else(|e| fail(MooseStatus::InvalidArgument, e.to_string()))?)
        }
        _ => return fail(MooseStatus::InvalidArgument, format!("unknown backend {spec:?}")),
    };
    Ok(Gateway::new(backend))
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn moose_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or null. The caller
/// frees the result with [`moose_string_free`].
#[no_mangle]
pub extern "C" fn moose_last_error() -> *mut c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null_mut(), |s| s.clone().into_raw()))
}

/// # Safety
/// `s` must be null or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn moose_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Parses a line-delimited corpus (`{id, title, abstract}` per line).
///
/// # Safety
/// `name` and `jsonl` must be valid C strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn moose_corpus_parse(
    name: *const c_char,
    jsonl: *const c_char,
    out: *mut *mut MooseCorpus,
) -> MooseStatus {
    guard(|| {
        let corpus = InspirationCorpus::parse_jsonl(text(name, "name")?, text(jsonl, "corpus")?)
            .or_else(|e| fail(MooseStatus::InvalidArgument, e.to_string()))?;
        write_out(out, Box::into_raw(Box::new(MooseCorpus(Arc::new(corpus)))))
    })
}

/// # Safety
/// `corpus` must be null or a handle from [`moose_corpus_parse`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn moose_corpus_free(corpus: *mut MooseCorpus) {
    if !corpus.is_null() {
        drop(Box::from_raw(corpus));
    }
}

/// Starts a session. `survey` and `blueprint` may be null. `backend` is
/// `live`, `synthetic[:seed]` or `scripted:<path>`. Ids are generated
/// deterministically from `seed`.
///
/// # Safety
/// String arguments must be valid C strings or null where allowed;
/// `corpus` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn moose_session_new(
    question: *const c_char,
    survey: *const c_char,
    blueprint: *const c_char,
    corpus: *const MooseCorpus,
    backend: *const c_char,
    seed: u64,
    out: *mut *mut MooseSession,
) -> MooseStatus {
    guard(|| {
        let corpus = corpus.as_ref().map_or_else(|| fail(MooseStatus::NullPointer, "corpus is null"), Ok)?;
        let gateway = gateway_for(text(backend, "backend")?)?;
        let session = Session::init(
            text(question, "question")?,
            optional_text(survey, "survey")?,
            optional_text(blueprint, "blueprint")?,
            corpus.0.clone(),
            IdGen::deterministic(seed),
        )?;
        write_out(out, Box::into_raw(Box::new(MooseSession { session, gateway })))
    })
}

/// Restores a session from its export, refusing logs that do not replay.
///
/// # Safety
/// As for [`moose_session_new`].
#[no_mangle]
pub unsafe extern "C" fn moose_session_restore(
    export_json: *const c_char,
    corpus: *const MooseCorpus,
    backend: *const c_char,
    seed: u64,
    out: *mut *mut MooseSession,
) -> MooseStatus {
    guard(|| {
        let corpus = corpus.as_ref().map_or_else(|| fail(MooseStatus::NullPointer, "corpus is null"), Ok)?;
        let gateway = gateway_for(text(backend, "backend")?)?;
        let session = Session::restore_json(text(export_json, "export")?, corpus.0.clone(), IdGen::deterministic(seed))?;
        write_out(out, Box::into_raw(Box::new(MooseSession { session, gateway })))
    })
}

/// # Safety
/// `session` must be null or a live handle, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn moose_session_free(session: *mut MooseSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}

/// Id of the root node.
///
/// # Safety
/// `session` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn moose_session_root(session: *mut MooseSession, out: *mut *mut c_char) -> MooseStatus {
    guard(|| {
        let s = session_mut(session)?;
        write_string(out, s.session.tree().root_id().to_string())
    })
}

/// Full session export as JSON.
///
/// # Safety
/// `session` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn moose_session_export(session: *mut MooseSession, out: *mut *mut c_char) -> MooseStatus {
    guard(|| {
        let s = session_mut(session)?;
        write_string(out, s.session.export().to_json())
    })
}

/// # Safety
/// `session` must be a live handle; `node` and `feedback` valid C strings.
#[no_mangle]
pub unsafe extern "C" fn moose_session_feedback(
    session: *mut MooseSession,
    node: *const c_char,
    feedback: *const c_char,
) -> MooseStatus {
    guard(|| {
        let s = session_mut(session)?;
        s.session.apply_feedback(&NodeId::new(text(node, "node")?), text(feedback, "feedback")?)?;
        Ok(())
    })
}

/// # Safety
/// `session` must be a live handle; `node` a valid C string.
#[no_mangle]
pub unsafe extern "C" fn moose_session_route(
    session: *mut MooseSession,
    node: *const c_char,
    target: MooseStage,
) -> MooseStatus {
    guard(|| {
        let s = session_mut(session)?;
        s.session.route(&NodeId::new(text(node, "node")?), target.into())?;
        Ok(())
    })
}

/// One exploration round with default settings; writes the new node ids as
/// a JSON array.
///
/// # Safety
/// `session` must be a live handle; `node` a valid C string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn moose_session_explore(
    session: *mut MooseSession,
    node: *const c_char,
    out: *mut *mut c_char,
) -> MooseStatus {
    guard(|| {
        let s = session_mut(session)?;
        let engine = ExploratoryEngine::new(&s.gateway, ExploreConfig::default());
        let event = s.session.explore(&engine, &NodeId::new(text(node, "node")?))?;
        let ids: Vec<&NodeId> = event.payload.new_nodes().iter().map(|n| &n.id).collect();
        write_string(out, serde_json::to_string(&ids).expect("ids serialize"))
    })
}

/// Hierarchical refinement with default settings; writes the final node id.
/// A run that fails part-way is kept in the log and reported as
/// `Incomplete`.
///
/// # Safety
/// `session` must be a live handle; `node` a valid C string; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn moose_session_refine(
    session: *mut MooseSession,
    node: *const c_char,
    out: *mut *mut c_char,
) -> MooseStatus {
    guard(|| {
        let s = session_mut(session)?;
        let scorer = Scorer::with_default_criteria(&s.gateway);
        let engine = RefinementEngine::new(&s.gateway, scorer, RefineConfig::default());
        let event = s.session.refine(&engine, &NodeId::new(text(node, "node")?))?;
        let final_node = match &event.payload {
            moose_core::protocol::EventPayload::RefineRun { outcome, .. } => outcome.final_node.to_string(),
            _ => unreachable!("refine records a refine event"),
        };
        write_string(out, final_node)
    })
}

/// Checks an exported event log against the protocol grammar.
///
/// # Safety
/// `export_json` must be a valid C string.
#[no_mangle]
pub unsafe extern "C" fn moose_validate_export(export_json: *const c_char) -> MooseStatus {
    guard(|| {
        let export: SessionExport = serde_json::from_str(text(export_json, "export")?)
            .or_else(|e| fail(MooseStatus::InvalidArgument, e.to_string()))?;
        validate_trace(&export.events).or_else(|e| fail(MooseStatus::StageMismatch, e.to_string()))
    })
}

fn parse_entry(json: &str) -> FfiResult<GroundTruthEntry> {
    let entry: GroundTruthEntry =
        serde_json::from_str(json).or_else(|e| fail(MooseStatus::InvalidArgument, e.to_string()))?;
    entry.validate().or_else(|e| fail(MooseStatus::InvalidArgument, e))?;
    Ok(entry)
}

/// Recall of `hypothesis` against a ground-truth entry given as JSON.
///
/// # Safety
/// String arguments must be valid C strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn moose_recall(
    hypothesis: *const c_char,
    entry_json: *const c_char,
    out: *mut f64,
) -> MooseStatus {
    guard(|| {
        let entry = parse_entry(text(entry_json, "entry")?)?;
        write_out(out, compute_recall(text(hypothesis, "hypothesis")?, &entry))
    })
}

/// Writes 1 when `feedback` discloses no 8-token span of the entry, else 0.
///
/// # Safety
/// String arguments must be valid C strings; `passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn moose_leak_check(
    feedback: *const c_char,
    entry_json: *const c_char,
    passed: *mut i32,
) -> MooseStatus {
    guard(|| {
        let entry = parse_entry(text(entry_json, "entry")?)?;
        write_out(passed, i32::from(leak_check(text(feedback, "feedback")?, &entry).passed()))
    })
}
