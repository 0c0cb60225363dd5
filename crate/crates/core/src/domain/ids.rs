//! Sortable identifiers and the clocks that stamp them.
//!
//! Every id has the shape `{prefix}-{millis:013}-{seq:06}`. Both numeric
//! fields are fixed width, so lexicographic order equals creation order as
//! long as ids come from one [`IdGen`].

use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

macro_rules! string_id {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(value: impl Into<String>) -> Self {
                Self(value.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(value: &str) -> Self {
                Self(value.to_string())
            }
        }

        impl From<String> for $name {
            fn from(value: String) -> Self {
                Self(value)
            }
        }
    };
}

string_id!(
    /// Identifier of a hypothesis node within one session tree.
    NodeId
);
string_id!(
    /// Identifier of a protocol event; strictly increasing within a session.
    EventId
);
string_id!(InspirationId);
string_id!(SessionId);

/// Source of millisecond timestamps.
pub trait Clock: Send + Sync {
    fn now_millis(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_millis(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// Deterministic clock: starts at `origin` and advances one millisecond per read.
#[derive(Debug)]
pub struct LogicalClock {
    origin: u64,
    ticks: AtomicU64,
}

impl LogicalClock {
    /// 2023-11-14T22:13:20Z, an arbitrary fixed origin.
    pub const DEFAULT_ORIGIN: u64 = 1_700_000_000_000;

    pub fn new(origin: u64) -> Self {
        Self {
            origin,
            ticks: AtomicU64::new(0),
        }
    }
}

impl Default for LogicalClock {
    fn default() -> Self {
        Self::new(Self::DEFAULT_ORIGIN)
    }
}

impl Clock for LogicalClock {
    fn now_millis(&self) -> u64 {
        self.origin + self.ticks.fetch_add(1, Ordering::SeqCst)
    }
}

#[derive(Debug, Default)]
struct GenState {
    last_millis: u64,
    seq: u64,
}

/// Monotonic id generator shared by everything that writes to one session.
#[derive(Clone)]
pub struct IdGen {
    clock: Arc<dyn Clock>,
    state: Arc<Mutex<GenState>>,
}

impl fmt::Debug for IdGen {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let state = self.state.lock().expect("id generator poisoned");
        f.debug_struct("IdGen")
            .field("last_millis", &state.last_millis)
            .field("seq", &state.seq)
            .finish()
    }
}

impl IdGen {
    pub fn new(clock: Arc<dyn Clock>) -> Self {
        Self {
            clock,
            state: Arc::new(Mutex::new(GenState::default())),
        }
    }

    pub fn system() -> Self {
        Self::new(Arc::new(SystemClock))
    }

    /// Logical clock at the default origin shifted by `seed` seconds.
    pub fn deterministic(seed: u64) -> Self {
        Self::new(Arc::new(LogicalClock::new(
            LogicalClock::DEFAULT_ORIGIN + seed.saturating_mul(1000),
        )))
    }

    /// Advances the generator past an id produced earlier (after a restore).
    pub fn resume_after(&self, id: &str) {
        if let Some((millis, seq)) = parse_id(id) {
            let mut state = self.state.lock().expect("id generator poisoned");
            state.last_millis = state.last_millis.max(millis);
            state.seq = state.seq.max(seq);
        }
    }

    /// Returns a fresh id with the given prefix and its timestamp.
    pub fn next(&self, prefix: &str) -> (String, u64) {
        let now = self.clock.now_millis();
        let mut state = self.state.lock().expect("id generator poisoned");
        state.last_millis = state.last_millis.max(now);
        state.seq += 1;
        (
            format!("{prefix}-{:013}-{:06}", state.last_millis, state.seq),
            state.last_millis,
        )
    }

    pub fn node_id(&self) -> NodeId {
        NodeId(self.next("n").0)
    }

    pub fn event_id(&self) -> (EventId, u64) {
        let (id, ts) = self.next("e");
        (EventId(id), ts)
    }

    pub fn session_id(&self) -> SessionId {
        SessionId(self.next("s").0)
    }
}

/// Hands out node ids stamped with the event that creates them.
#[derive(Clone, Debug)]
pub struct NodeMint<'a> {
    ids: &'a IdGen,
    event: EventId,
}

impl<'a> NodeMint<'a> {
    pub fn new(ids: &'a IdGen, event: EventId) -> Self {
        Self { ids, event }
    }

    pub fn next_id(&self) -> NodeId {
        self.ids.node_id()
    }

    pub fn event(&self) -> &EventId {
        &self.event
    }
}

/// Extracts `(millis, seq)` from an id produced by [`IdGen`].
pub fn parse_id(id: &str) -> Option<(u64, u64)> {
    let mut parts = id.rsplitn(3, '-');
    let seq = parts.next()?.parse().ok()?;
    let millis = parts.next()?.parse().ok()?;
    parts.next()?;
    Some((millis, seq))
}
