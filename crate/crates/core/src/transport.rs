//! The feed port and its two adapters.
//!
//! [`SimulatedFeed`] is the deterministic reference feed used by tests and
//! scenarios. [`WebhookAdapter`] receives inbound records over HTTP (the
//! server hands them to [`WebhookAdapter::receive`]) and delivers outbound
//! posts through a [`WebhookSink`].
//!
//! Inbound and outbound records share the envelope of log records:
//! `{"v":1,"kind":...,"payload":{...}}`.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ids::{ParticipantId, PostId};
use crate::mission::VoteKind;
use crate::protocol::{nfc_len, InboundPost, MessageKind, OutboundMessage, CHAR_LIMIT};
use crate::scheduler::Clock;
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TransportError {
    #[error("transport unavailable: {0}")]
    TransportDown(String),
    #[error("message of {len} code points exceeds the limit")]
    RejectedTooLong { len: usize },
    #[error("cursor {0} is older than the retained feed")]
    StaleCursor(u64),
    #[error("malformed inbound record: {0}")]
    Malformed(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EndorsementKind {
    Repost,
    Favorite,
}

impl From<EndorsementKind> for VoteKind {
    fn from(k: EndorsementKind) -> Self {
        match k {
            EndorsementKind::Repost => VoteKind::Repost,
            EndorsementKind::Favorite => VoteKind::Favorite,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum TransportEvent {
    PostObserved(InboundPost),
    EndorsementObserved {
        post_id: PostId,
        author: ParticipantId,
        kind: EndorsementKind,
        at: Timestamp,
    },
}

impl TransportEvent {
    pub fn at(&self) -> Timestamp {
        match self {
            TransportEvent::PostObserved(p) => p.at,
            TransportEvent::EndorsementObserved { at, .. } => *at,
        }
    }
}

/// An inbound event with its 1-based position in the transport's stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Positioned {
    pub position: u64,
    pub event: TransportEvent,
}

/// The feed port. Implementations serialize internally; `post` and `drain`
/// may be called from different threads.
pub trait Transport: Send + Sync {
    /// Stable name, used for the cursor file.
    fn name(&self) -> &str;

    /// Publishes `message`. Repeating a call with the same `dedup_token`
    /// returns the first call's post id and publishes nothing new.
    fn post(&self, message: &OutboundMessage, dedup_token: &str) -> Result<PostId, TransportError>;

    /// Every event after `cursor` (a position; 0 is the initial cursor), in
    /// observation order, and the new cursor.
    fn drain(&self, cursor: u64) -> Result<(Vec<Positioned>, u64), TransportError>;
}

fn check_length(message: &OutboundMessage) -> Result<(), TransportError> {
    let len = nfc_len(&message.text);
    if len > CHAR_LIMIT {
        return Err(TransportError::RejectedTooLong { len });
    }
    Ok(())
}

fn drain_from(events: &[TransportEvent], cursor: u64) -> (Vec<Positioned>, u64) {
    let start = (cursor as usize).min(events.len());
    let batch = events[start..]
        .iter()
        .enumerate()
        .map(|(i, event)| Positioned {
            position: (start + i + 1) as u64,
            event: event.clone(),
        })
        .collect();
    (batch, events.len().max(start) as u64)
}

/// A post published by the engine on the simulated feed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedPost {
    pub post_id: PostId,
    pub kind: MessageKind,
    pub text: String,
    pub reply_to: Option<PostId>,
    pub notify: Vec<ParticipantId>,
    pub dedup_token: String,
    pub at: Timestamp,
}

#[derive(Debug, Default)]
struct SimState {
    inbound: Vec<TransportEvent>,
    published: Vec<FeedPost>,
    by_token: BTreeMap<String, PostId>,
    outages: Vec<(Timestamp, Timestamp)>,
    fail_next: u32,
    attempts: u64,
}

/// Deterministic in-memory feed. Clones share the same feed, so an engine
/// can be torn down and rebuilt against it to simulate a restart.
#[derive(Clone)]
pub struct SimulatedFeed {
    name: String,
    clock: Arc<dyn Clock>,
    state: Arc<Mutex<SimState>>,
}

impl std::fmt::Debug for SimulatedFeed {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SimulatedFeed").field("name", &self.name).finish()
    }
}

impl SimulatedFeed {
    pub fn new(clock: Arc<dyn Clock>) -> Self {
        Self::named("sim", clock)
    }

    pub fn named(name: &str, clock: Arc<dyn Clock>) -> Self {
        Self {
            name: name.to_string(),
            clock,
            state: Arc::default(),
        }
    }

    /// Adds an observation to the inbound stream.
    pub fn inject(&self, event: TransportEvent) {
        self.state.lock().unwrap().inbound.push(event);
    }

    /// Posts fail with `TransportDown` while `from <= now < until`.
    pub fn add_outage(&self, from: Timestamp, until: Timestamp) {
        self.state.lock().unwrap().outages.push((from, until));
    }

    /// The next `n` post attempts fail regardless of time.
    pub fn fail_next(&self, n: u32) {
        self.state.lock().unwrap().fail_next = n;
    }

    /// Everything the engine has published, in order.
    pub fn published(&self) -> Vec<FeedPost> {
        self.state.lock().unwrap().published.clone()
    }

    pub fn inbound_len(&self) -> usize {
        self.state.lock().unwrap().inbound.len()
    }

    /// Post attempts seen, including failed and deduplicated ones.
    pub fn attempts(&self) -> u64 {
        self.state.lock().unwrap().attempts
    }
}

impl Transport for SimulatedFeed {
    fn name(&self) -> &str {
        &self.name
    }

    fn post(&self, message: &OutboundMessage, dedup_token: &str) -> Result<PostId, TransportError> {
        check_length(message)?;
        let now = self.clock.now();
        let mut st = self.state.lock().unwrap();
        st.attempts += 1;
        if st.fail_next > 0 {
            st.fail_next -= 1;
            return Err(TransportDown("injected failure".into()));
        }
        if st.outages.iter().any(|&(from, until)| from <= now && now < until) {
            return Err(TransportDown(format!("outage at {now}")));
        }
        if let Some(id) = st.by_token.get(dedup_token) {
            return Ok(id.clone());
        }
        let post_id = PostId::new(format!("sim-{}", st.published.len() + 1));
        st.published.push(FeedPost {
            post_id: post_id.clone(),
            kind: message.kind,
            text: message.text.clone(),
            reply_to: message.reply_to.clone(),
            notify: message.notify.iter().cloned().collect(),
            dedup_token: dedup_token.to_string(),
            at: now,
        });
        st.by_token.insert(dedup_token.to_string(), post_id.clone());
        Ok(post_id)
    }

    fn drain(&self, cursor: u64) -> Result<(Vec<Positioned>, u64), TransportError> {
        Ok(drain_from(&self.state.lock().unwrap().inbound, cursor))
    }
}

use TransportError::TransportDown;

/// Outbound record delivered by the webhook adapter.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutboundRecord {
    pub v: u32,
    pub kind: String,
    pub payload: OutboundPayload,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutboundPayload {
    pub post_id: PostId,
    pub dedup_token: String,
    pub message: MessageKind,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply_to: Option<PostId>,
    #[serde(default)]
    pub notify: Vec<ParticipantId>,
}

/// Where the webhook adapter delivers outbound records. The receiver is
/// expected to deduplicate on `dedup_token`.
pub trait WebhookSink: Send + Sync {
    fn deliver(&self, record: &OutboundRecord) -> Result<(), String>;
}

/// Collects deliveries in memory; stands in for a remote endpoint in tests.
#[derive(Debug, Clone, Default)]
pub struct MemorySink {
    delivered: Arc<Mutex<Vec<OutboundRecord>>>,
    failing: Arc<Mutex<u32>>,
}

impl MemorySink {
    pub fn delivered(&self) -> Vec<OutboundRecord> {
        self.delivered.lock().unwrap().clone()
    }

    pub fn fail_next(&self, n: u32) {
        *self.failing.lock().unwrap() = n;
    }
}

impl WebhookSink for MemorySink {
    fn deliver(&self, record: &OutboundRecord) -> Result<(), String> {
        let mut failing = self.failing.lock().unwrap();
        if *failing > 0 {
            *failing -= 1;
            return Err("injected failure".into());
        }
        let mut d = self.delivered.lock().unwrap();
        if !d.iter().any(|r| r.payload.dedup_token == record.payload.dedup_token) {
            d.push(record.clone());
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct InboundEnvelope {
    #[serde(default = "default_version")]
    v: u32,
    #[serde(flatten)]
    event: TransportEvent,
}

fn default_version() -> u32 {
    1
}

struct WebhookState {
    inbound: Vec<TransportEvent>,
    journal: Option<File>,
}

/// Webhook-backed transport. Inbound records are journaled (when a path is
/// given) so positions survive restarts.
pub struct WebhookAdapter {
    sink: Box<dyn WebhookSink>,
    state: Mutex<WebhookState>,
}

impl WebhookAdapter {
    pub const NAME: &'static str = "webhook";

    pub fn in_memory(sink: Box<dyn WebhookSink>) -> Self {
        Self {
            sink,
            state: Mutex::new(WebhookState {
                inbound: Vec::new(),
                journal: None,
            }),
        }
    }

    /// Reopens the journal at `path`, creating it if needed.
    pub fn with_journal(sink: Box<dyn WebhookSink>, path: &Path) -> std::io::Result<Self> {
        let mut inbound = Vec::new();
        if let Ok(f) = File::open(path) {
            for line in BufReader::new(f).lines() {
                let line = line?;
                // a torn last line from a crash is dropped
                if let Ok(event) = serde_json::from_str(&line) {
                    inbound.push(event);
                }
            }
        }
        let journal = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            sink,
            state: Mutex::new(WebhookState {
                inbound,
                journal: Some(journal),
            }),
        })
    }

    pub fn journal_path(data_dir: &Path) -> PathBuf {
        data_dir.join("cursors").join("webhook.inbound")
    }

    /// Accepts one inbound record (`{"v":1,"kind":"PostObserved","payload":{...}}`).
    pub fn receive(&self, body: &[u8]) -> Result<u64, TransportError> {
        let env: InboundEnvelope =
            serde_json::from_slice(body).map_err(|e| TransportError::Malformed(e.to_string()))?;
        if env.v != 1 {
            return Err(TransportError::Malformed(format!("unsupported version {}", env.v)));
        }
        Ok(self.inject(env.event))
    }

    /// Appends an observation and returns its position.
    pub fn inject(&self, event: TransportEvent) -> u64 {
        let mut st = self.state.lock().unwrap();
        if let Some(j) = st.journal.as_mut() {
            let line = serde_json::to_string(&event).expect("serializable");
            if let Err(e) = writeln!(j, "{line}").and_then(|_| j.sync_data()) {
                tracing::error!(error = %e, "inbound journal write failed");
            }
        }
        st.inbound.push(event);
        st.inbound.len() as u64
    }

    /// Post ids are derived from the dedup token, so retries agree.
    pub fn post_id_for(dedup_token: &str) -> PostId {
        PostId::new(format!("wh-{dedup_token}"))
    }
}

impl Transport for WebhookAdapter {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn post(&self, message: &OutboundMessage, dedup_token: &str) -> Result<PostId, TransportError> {
        check_length(message)?;
        let post_id = Self::post_id_for(dedup_token);
        let record = OutboundRecord {
            v: 1,
            kind: "OutboundPost".into(),
            payload: OutboundPayload {
                post_id: post_id.clone(),
                dedup_token: dedup_token.to_string(),
                message: message.kind,
                text: message.text.clone(),
                reply_to: message.reply_to.clone(),
                notify: message.notify.iter().cloned().collect(),
            },
        };
        self.sink.deliver(&record).map_err(TransportDown)?;
        Ok(post_id)
    }

    fn drain(&self, cursor: u64) -> Result<(Vec<Positioned>, u64), TransportError> {
        Ok(drain_from(&self.state.lock().unwrap().inbound, cursor))
    }
}
