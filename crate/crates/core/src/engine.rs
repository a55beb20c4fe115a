//! The command path: every mutation of a mission goes through its slot lock,
//! is appended to the mission log, and only then becomes visible.
//!
//! Outbound messages follow persist-then-post. A transition (or mission
//! creation) is appended first; its messages are queued in the outbox and
//! posted with a dedup token `<mission>/<kind>/<n>`; a `MessagePosted` event
//! is appended once the transport accepts the post. The outbox is not
//! persisted. On open it is rebuilt by folding each log and listing the
//! messages whose tokens have no `MessagePosted` yet. A crash between post
//! and record therefore re-posts with the same token, which the transport
//! deduplicates.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::Serialize;
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::config::EngineConfig;
use crate::ids::{IdeaId, MissionId, ParticipantId, PostId};
use crate::mission::{
    self, create_mission, due_transitions, next_trigger, Event, EventBody, Hashtag, MissionError,
    MissionSpec, MissionState, Phase, PostRef, Provenance, VoteKind,
};
use crate::persistence::{LogWriter, MissionListing, Store, StoreError};
use crate::protocol::{
    check_outbound, classify, contains_token, nfc_len, Classified, Composer, MessageKind,
    OutboundMessage, ProtocolError, TemplateError, Templates, CHAR_LIMIT,
};
use crate::scheduler::{self, WakePlan};
use crate::time::Timestamp;
use crate::transport::{Positioned, Transport, TransportError, TransportEvent};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error(transparent)]
    Mission(#[from] MissionError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("mission {0} not found")]
    NotFound(MissionId),
    #[error("hashtag {0} is already used by an active mission")]
    DuplicateHashtag(Hashtag),
    #[error("kickoff text has {len} code points; the limit is {limit}")]
    KickoffTooLong { len: usize, limit: usize },
    #[error("kickoff text must carry the hashtag and the idea: marker exactly once")]
    InvalidKickoff,
    #[error("engine halted by an injected crash")]
    Crashed,
}

impl EngineError {
    /// Stable machine-readable name.
    pub fn code(&self) -> &'static str {
        match self {
            EngineError::Mission(e) => e.code(),
            EngineError::Store(StoreError::SequenceConflict { .. }) => "SequenceConflict",
            EngineError::Store(StoreError::NotFound(_)) | EngineError::NotFound(_) => "NotFound",
            EngineError::Store(_) => "StorageError",
            EngineError::Protocol(_) => "Uncomposable",
            EngineError::Transport(_) => "TransportDown",
            EngineError::Template(_) => "InvalidTemplates",
            EngineError::DuplicateHashtag(_) => "DuplicateHashtag",
            EngineError::KickoffTooLong { .. } => "KickoffTooLong",
            EngineError::InvalidKickoff => "InvalidKickoff",
            EngineError::Crashed => "Crashed",
        }
    }
}

/// Outcome of one scheduler tick.
#[derive(Debug, Default, Clone, Serialize)]
pub struct TickReport {
    /// Transitions applied, in firing order.
    pub fired: Vec<(MissionId, Event)>,
    /// Messages the transport accepted during this tick.
    pub posted: usize,
    /// Whether a post failed; transitions are applied regardless and the
    /// message stays queued for retry.
    pub transport_down: bool,
}

/// Result of a mission creation request.
#[derive(Debug, Clone)]
pub struct Created {
    pub state: Arc<MissionState>,
    pub suggested_kickoff: String,
}

#[derive(Debug, Clone)]
struct Pending {
    mission_id: MissionId,
    token: String,
    message: OutboundMessage,
    attempts: u32,
    next_attempt: Option<Timestamp>,
}

struct Inner {
    state: MissionState,
    writer: LogWriter,
}

struct Slot {
    inner: Mutex<Inner>,
    snapshot: RwLock<Arc<MissionState>>,
}

impl Slot {
    fn snapshot(&self) -> Arc<MissionState> {
        self.snapshot.read().unwrap().clone()
    }
}

/// Counts down interleaving points (each append, each accepted post) and
/// halts the engine when it reaches zero.
#[derive(Default)]
struct CrashSwitch {
    remaining: AtomicU64,
    armed: AtomicBool,
    dead: AtomicBool,
}

impl CrashSwitch {
    fn point(&self) -> Result<(), EngineError> {
        if self.dead.load(Ordering::SeqCst) {
            return Err(EngineError::Crashed);
        }
        if self.armed.load(Ordering::SeqCst) && self.remaining.fetch_sub(1, Ordering::SeqCst) == 1 {
            self.dead.store(true, Ordering::SeqCst);
            return Err(EngineError::Crashed);
        }
        Ok(())
    }

    fn alive(&self) -> Result<(), EngineError> {
        if self.dead.load(Ordering::SeqCst) {
            Err(EngineError::Crashed)
        } else {
            Ok(())
        }
    }
}

pub struct Engine {
    config: EngineConfig,
    composer: Composer,
    store: Store,
    transport: Arc<dyn Transport>,
    missions: RwLock<BTreeMap<MissionId, Arc<Slot>>>,
    create_lock: Mutex<u64>,
    cursor: Mutex<u64>,
    outbox: Mutex<VecDeque<Pending>>,
    flush_lock: Mutex<()>,
    crash: CrashSwitch,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("data_dir", &self.store.root())
            .field("transport", &self.transport.name())
            .finish()
    }
}

fn opens(kind: MessageKind) -> Phase {
    match kind {
        MessageKind::Kickoff => Phase::Ideation,
        MessageKind::VotePrompt => Phase::Voting,
        MessageKind::SelectionAnnouncement => Phase::Planning,
        MessageKind::ActionReminder => Phase::ActionPending,
    }
}

/// The message kind announced when `event` has just been applied, if any.
fn announces(event: &Event) -> Option<MessageKind> {
    match &event.body {
        EventBody::MissionCreated { .. } => Some(MessageKind::Kickoff),
        EventBody::PhaseTransitioned { to, .. } => {
            MessageKind::ALL.into_iter().find(|k| opens(*k) == *to)
        }
        _ => None,
    }
}

pub fn dedup_token(mission: &MissionId, kind: MessageKind, n: usize) -> String {
    format!("{mission}/{}/{n}", kind.slug())
}

fn sequence_number(id: &MissionId) -> Option<u64> {
    id.as_str().strip_prefix('m')?.parse().ok()
}

impl Engine {
    /// Opens the data directory: reopens every mission log (truncating torn
    /// tails), restores the inbound cursor and rebuilds the outbox.
    pub fn open(
        config: EngineConfig,
        store: Store,
        transport: Arc<dyn Transport>,
    ) -> Result<Self, EngineError> {
        let templates = match &config.templates {
            Some(path) => Templates::load(path)?,
            None => Templates::default(),
        };
        let composer = Composer::new(templates);
        let name = transport.name().to_string();
        let mut cursor = store.load_cursor(&name)?;
        let mut missions = BTreeMap::new();
        let mut outbox = VecDeque::new();
        let mut last_number = 0;
        for id in store.mission_ids()? {
            last_number = last_number.max(sequence_number(&id).unwrap_or(0));
            let writer = store.writer(&id)?;
            let events = store.read_events(&id)?;
            let Some(first) = events.first() else {
                continue;
            };
            let mut state = MissionState::genesis(first)?;
            let mut due = composer_messages(&composer, first, &state);
            for event in &events[1..] {
                state.apply(event)?;
                due.extend(composer_messages(&composer, event, &state));
            }
            for event in &events {
                if let Some(Provenance::Transport { name: n, position }) = &event.provenance {
                    if *n == name {
                        cursor = cursor.max(*position);
                    }
                }
            }
            outbox.extend(
                due.into_iter()
                    .filter(|(token, _)| !state.has_message_token(token))
                    .map(|(token, message)| Pending {
                        mission_id: id.clone(),
                        token,
                        message,
                        attempts: 0,
                        next_attempt: None,
                    }),
            );
            let snapshot = RwLock::new(Arc::new(state.clone()));
            missions.insert(
                id,
                Arc::new(Slot {
                    inner: Mutex::new(Inner { state, writer }),
                    snapshot,
                }),
            );
        }
        if !outbox.is_empty() {
            tracing::info!(pending = outbox.len(), "outbox rebuilt from logs");
        }
        Ok(Self {
            config,
            composer,
            store,
            transport,
            missions: RwLock::new(missions),
            create_lock: Mutex::new(last_number),
            cursor: Mutex::new(cursor),
            outbox: Mutex::new(outbox),
            flush_lock: Mutex::new(()),
            crash: CrashSwitch::default(),
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn composer(&self) -> &Composer {
        &self.composer
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn transport(&self) -> &Arc<dyn Transport> {
        &self.transport
    }

    /// Halts the engine at the `n`-th interleaving point from now (1-based).
    pub fn arm_crash(&self, n: u64) {
        self.crash.remaining.store(n, Ordering::SeqCst);
        self.crash.armed.store(true, Ordering::SeqCst);
    }

    pub fn is_crashed(&self) -> bool {
        self.crash.dead.load(Ordering::SeqCst)
    }

    fn slot(&self, id: &MissionId) -> Result<Arc<Slot>, EngineError> {
        self.missions
            .read()
            .unwrap()
            .get(id)
            .cloned()
            .ok_or_else(|| EngineError::NotFound(id.clone()))
    }

    /// Current state without waiting on writers.
    pub fn state(&self, id: &MissionId) -> Result<Arc<MissionState>, EngineError> {
        Ok(self.slot(id)?.snapshot())
    }

    pub fn states(&self) -> Vec<Arc<MissionState>> {
        self.missions
            .read()
            .unwrap()
            .values()
            .map(|s| s.snapshot())
            .collect()
    }

    pub fn list(&self) -> Vec<MissionListing> {
        self.states().iter().map(|s| MissionListing::of(s)).collect()
    }

    pub fn plan(&self) -> WakePlan {
        let states = self.states();
        scheduler::plan(states.iter().map(|s| s.as_ref()))
    }

    /// Messages still waiting for the transport, in posting order.
    pub fn pending_messages(&self) -> Vec<(MissionId, String)> {
        self.outbox
            .lock()
            .unwrap()
            .iter()
            .map(|p| (p.mission_id.clone(), p.token.clone()))
            .collect()
    }

    /// Earliest time a failed post becomes eligible for retry.
    pub fn next_retry(&self) -> Option<Timestamp> {
        self.outbox
            .lock()
            .unwrap()
            .iter()
            .filter_map(|p| p.next_attempt)
            .min()
    }

    /// The kickoff the form would suggest, without creating anything.
    pub fn suggest_kickoff(&self, spec: MissionSpec, now: Timestamp) -> Result<String, EngineError> {
        let spec = spec.validated(now)?;
        let schedule = mission::Schedule::derive(&spec, now, &self.config.timing());
        Ok(self.composer.kickoff(&spec, &schedule)?.text)
    }

    /// Creates a mission. An edited kickoff must stay within the limit and
    /// keep the hashtag and the `idea:` marker.
    pub fn create(
        &self,
        spec: MissionSpec,
        kickoff_text: Option<String>,
        now: Timestamp,
    ) -> Result<Created, EngineError> {
        self.crash.alive()?;
        let mut last_number = self.create_lock.lock().unwrap();
        let id = MissionId::sequential(*last_number + 1);
        let (state, mut genesis) =
            create_mission(id.clone(), spec, now, &self.config.timing(), &self.config.bot_handle)?;
        let hashtag = state.spec.hashtag.clone();
        if self
            .states()
            .iter()
            .any(|s| !s.phase.is_terminal() && s.spec.hashtag == hashtag)
        {
            return Err(EngineError::DuplicateHashtag(hashtag));
        }
        let suggested = self.composer.kickoff(&state.spec, &state.schedule)?.text;
        if let Some(text) = kickoff_text {
            let text: String = text.trim().nfc().collect();
            let len = nfc_len(&text);
            if len > CHAR_LIMIT {
                return Err(EngineError::KickoffTooLong {
                    len,
                    limit: CHAR_LIMIT,
                });
            }
            if !check_outbound(MessageKind::Kickoff, &text, hashtag.as_str()) {
                return Err(EngineError::InvalidKickoff);
            }
            if let EventBody::MissionCreated { kickoff_text, .. } = &mut genesis.body {
                *kickoff_text = Some(text);
            }
        }
        genesis.provenance = Some(Provenance::Api);
        let state = MissionState::genesis(&genesis)?;
        let mut writer = self.store.writer(&id)?;
        if writer.last_seq() != 0 {
            return Err(StoreError::SequenceConflict {
                mission: id,
                expected: writer.last_seq() + 1,
                got: 1,
            }
            .into());
        }
        writer.append(&genesis)?;
        *last_number += 1;
        self.crash.point()?;
        self.enqueue(&id, composer_messages(&self.composer, &genesis, &state));
        let snapshot = Arc::new(state.clone());
        self.missions.write().unwrap().insert(
            id.clone(),
            Arc::new(Slot {
                inner: Mutex::new(Inner { state, writer }),
                snapshot: RwLock::new(snapshot.clone()),
            }),
        );
        drop(last_number);
        tracing::info!(mission = %id, "mission created");
        self.flush(now)?;
        Ok(Created {
            state: self.state(&id).unwrap_or(snapshot),
            suggested_kickoff: suggested,
        })
    }

    pub fn submit_idea(
        &self,
        id: &MissionId,
        author: &ParticipantId,
        text: &str,
        now: Timestamp,
    ) -> Result<Arc<MissionState>, EngineError> {
        self.command(id, now, |s, t| mission::submit_idea(s, author, text, t, None))
    }

    pub fn vote(
        &self,
        id: &MissionId,
        voter: &ParticipantId,
        idea: IdeaId,
        kind: VoteKind,
        now: Timestamp,
    ) -> Result<Arc<MissionState>, EngineError> {
        self.command(id, now, |s, t| mission::cast_vote(s, voter, idea, kind, t, None))
    }

    pub fn add_detail(
        &self,
        id: &MissionId,
        author: &ParticipantId,
        text: &str,
        now: Timestamp,
    ) -> Result<Arc<MissionState>, EngineError> {
        self.command(id, now, |s, t| mission::add_detail(s, author, text, t, None))
    }

    pub fn subscribe(
        &self,
        id: &MissionId,
        who: &ParticipantId,
        phases: BTreeSet<Phase>,
        now: Timestamp,
    ) -> Result<Arc<MissionState>, EngineError> {
        self.command(id, now, |s, t| mission::subscribe(s, who, phases.clone(), t))
    }

    pub fn cancel(
        &self,
        id: &MissionId,
        by: &ParticipantId,
        now: Timestamp,
    ) -> Result<Arc<MissionState>, EngineError> {
        self.command(id, now, |s, t| mission::cancel(s, by, t))
    }

    /// Runs a mission command under the slot lock after catching up on due
    /// transitions.
    fn command<F>(&self, id: &MissionId, now: Timestamp, f: F) -> Result<Arc<MissionState>, EngineError>
    where
        F: FnOnce(&MissionState, Timestamp) -> Result<Vec<Event>, MissionError>,
    {
        self.crash.alive()?;
        let slot = self.slot(id)?;
        {
            let mut inner = slot.inner.lock().unwrap();
            let result = self.catch_up(&slot, &mut inner, now).and_then(|_| {
                let events = f(&inner.state, now)?;
                self.commit(&slot, &mut inner, events, Provenance::Api)
            });
            result?;
        }
        self.flush(now)?;
        Ok(slot.snapshot())
    }

    /// Appends `events` one by one; each is checked against the state before
    /// it touches the log.
    fn commit(
        &self,
        slot: &Slot,
        inner: &mut Inner,
        events: Vec<Event>,
        provenance: Provenance,
    ) -> Result<Vec<Event>, EngineError> {
        let mut done = Vec::with_capacity(events.len());
        for event in events {
            let event = event.with_provenance(provenance.clone());
            let mut next = inner.state.clone();
            next.apply(&event)?;
            inner.writer.append(&event)?;
            self.crash.point()?;
            let messages = composer_messages(&self.composer, &event, &next);
            inner.state = next;
            *slot.snapshot.write().unwrap() = Arc::new(inner.state.clone());
            self.enqueue(&inner.state.mission_id, messages);
            done.push(event);
        }
        Ok(done)
    }

    fn catch_up(&self, slot: &Slot, inner: &mut Inner, now: Timestamp) -> Result<Vec<Event>, EngineError> {
        let due = due_transitions(&inner.state, now);
        if due.is_empty() {
            return Ok(due);
        }
        self.commit(slot, inner, due, Provenance::Scheduler)
    }

    fn enqueue(&self, id: &MissionId, messages: Vec<(String, OutboundMessage)>) {
        if messages.is_empty() {
            return;
        }
        let mut outbox = self.outbox.lock().unwrap();
        for (token, message) in messages {
            outbox.push_back(Pending {
                mission_id: id.clone(),
                token,
                message,
                attempts: 0,
                next_attempt: None,
            });
        }
    }

    /// Fires every due transition across missions in (trigger time, mission
    /// id) order, then posts what is queued.
    pub fn tick(&self, now: Timestamp) -> Result<TickReport, EngineError> {
        self.crash.alive()?;
        let mut report = TickReport::default();
        loop {
            let earliest = self
                .states()
                .iter()
                .filter_map(|s| {
                    next_trigger(s)
                        .filter(|(t, _)| *t <= now)
                        .map(|(t, _)| (t, s.mission_id.clone()))
                })
                .min();
            let Some((_, id)) = earliest else { break };
            let slot = self.slot(&id)?;
            let mut inner = slot.inner.lock().unwrap();
            let Some(first) = due_transitions(&inner.state, now).into_iter().next() else {
                continue;
            };
            let fired = self.commit(&slot, &mut inner, vec![first], Provenance::Scheduler)?;
            for event in fired {
                tracing::info!(mission = %id, ?event.body, "transition");
                report.fired.push((id.clone(), event));
            }
        }
        let (posted, down) = self.flush_report(now)?;
        report.posted = posted;
        report.transport_down = down;
        Ok(report)
    }

    fn flush(&self, now: Timestamp) -> Result<(), EngineError> {
        self.flush_report(now).map(|_| ())
    }

    /// Posts queued messages in order. A failure leaves the message (and
    /// everything behind it) queued with exponential backoff.
    fn flush_report(&self, now: Timestamp) -> Result<(usize, bool), EngineError> {
        let _guard = self.flush_lock.lock().unwrap();
        let mut posted = 0;
        loop {
            self.crash.alive()?;
            let Some(next) = self.outbox.lock().unwrap().front().cloned() else {
                return Ok((posted, false));
            };
            if next.next_attempt.is_some_and(|t| t > now) {
                return Ok((posted, false));
            }
            match self.transport.post(&next.message, &next.token) {
                Ok(post_id) => {
                    self.crash.point()?;
                    self.record_post(&next, post_id, now)?;
                    self.outbox.lock().unwrap().pop_front();
                    posted += 1;
                }
                Err(TransportError::TransportDown(reason)) => {
                    let mut outbox = self.outbox.lock().unwrap();
                    if let Some(front) = outbox.front_mut() {
                        front.attempts += 1;
                        front.next_attempt = Some(now + self.config.retry_delay(front.attempts));
                        tracing::warn!(token = %front.token, attempts = front.attempts, %reason, "post failed");
                    }
                    return Ok((posted, true));
                }
                Err(e) => {
                    // a length violation here is a composition bug; do not
                    // block the queue behind it
                    tracing::error!(token = %next.token, error = %e, "post rejected");
                    self.outbox.lock().unwrap().pop_front();
                }
            }
        }
    }

    fn record_post(&self, pending: &Pending, post_id: PostId, now: Timestamp) -> Result<(), EngineError> {
        let slot = self.slot(&pending.mission_id)?;
        let mut inner = slot.inner.lock().unwrap();
        if inner.state.has_message_token(&pending.token) {
            return Ok(());
        }
        let event = Event {
            seq: inner.state.last_seq + 1,
            mission_id: pending.mission_id.clone(),
            at: now.max(inner.state.last_at),
            body: EventBody::MessagePosted {
                message: pending.message.kind,
                dedup_token: pending.token.clone(),
                post_id,
                text: pending.message.text.clone(),
            },
            provenance: None,
        };
        self.commit(&slot, &mut inner, vec![event], Provenance::Scheduler)?;
        Ok(())
    }

    /// Drains the transport and applies what it observed. Returns how many
    /// inbound events were consumed.
    pub fn ingest(&self, now: Timestamp) -> Result<usize, EngineError> {
        self.crash.alive()?;
        let mut cursor = self.cursor.lock().unwrap();
        let (batch, next_cursor) = self.transport.drain(*cursor)?;
        let count = batch.len();
        for item in batch {
            self.apply_inbound(&item, now)?;
        }
        if next_cursor != *cursor {
            *cursor = next_cursor;
            self.store.save_cursor(self.transport.name(), next_cursor)?;
        }
        drop(cursor);
        self.flush(now)?;
        Ok(count)
    }

    fn route(&self, event: &TransportEvent) -> Option<MissionId> {
        let states = self.states();
        let by_post = |p: &PostId| {
            states
                .iter()
                .find(|s| s.posts.contains_key(p))
                .map(|s| s.mission_id.clone())
        };
        match event {
            TransportEvent::EndorsementObserved { post_id, .. } => by_post(post_id),
            TransportEvent::PostObserved(post) => post
                .repost_of
                .as_ref()
                .and_then(by_post)
                .or_else(|| post.reply_to.as_ref().and_then(by_post))
                .or_else(|| {
                    states
                        .iter()
                        .find(|s| {
                            !s.phase.is_terminal() && contains_token(&post.text, s.spec.hashtag.as_str())
                        })
                        .map(|s| s.mission_id.clone())
                }),
        }
    }

    fn apply_inbound(&self, item: &Positioned, now: Timestamp) -> Result<(), EngineError> {
        let Some(id) = self.route(&item.event) else {
            tracing::debug!(position = item.position, "inbound event matches no mission");
            return Ok(());
        };
        let slot = self.slot(&id)?;
        let mut inner = slot.inner.lock().unwrap();
        // an observation cannot be later than the engine's present
        let at = item.event.at().min(now);
        self.catch_up(&slot, &mut inner, at)?;
        let state = &inner.state;
        let outcome = match &item.event {
            TransportEvent::PostObserved(post) => match classify(post, state) {
                Ok(Classified::IdeaSubmission { .. }) => mission::submit_idea(
                    state,
                    &post.author,
                    &post.text,
                    at,
                    Some(post.post_id.clone()),
                ),
                Ok(Classified::VoteByRepost { target_idea }) => mission::cast_vote(
                    state,
                    &post.author,
                    target_idea,
                    VoteKind::Repost,
                    at,
                    Some(post.post_id.clone()),
                ),
                Ok(Classified::Detail { text }) => {
                    mission::add_detail(state, &post.author, &text, at, Some(post.post_id.clone()))
                }
                Ok(Classified::Chatter) => Ok(Vec::new()),
                Err(e) => {
                    tracing::warn!(error = %e, "classification failed");
                    Ok(Vec::new())
                }
            },
            TransportEvent::EndorsementObserved {
                post_id,
                author,
                kind,
                ..
            } => match state.posts.get(post_id) {
                Some(PostRef::Idea(idea)) => {
                    mission::cast_vote(state, author, *idea, (*kind).into(), at, None)
                }
                // endorsing a system message or a detail is not a vote
                _ => Ok(Vec::new()),
            },
        };
        let events = match outcome {
            Ok(events) => events,
            Err(e) => {
                tracing::info!(mission = %id, error = %e, "inbound event ignored");
                return Ok(());
            }
        };
        let provenance = Provenance::Transport {
            name: self.transport.name().to_string(),
            position: item.position,
        };
        self.commit(&slot, &mut inner, events, provenance)?;
        Ok(())
    }
}

/// Messages announced by `event`, composed against the state right after it.
fn composer_messages(
    composer: &Composer,
    event: &Event,
    state: &MissionState,
) -> Vec<(String, OutboundMessage)> {
    let Some(kind) = announces(event) else {
        return Vec::new();
    };
    match composer.compose(kind, state) {
        Ok(messages) => messages
            .into_iter()
            .enumerate()
            .map(|(n, m)| (dedup_token(&state.mission_id, kind, n), m))
            .collect(),
        Err(e) => {
            tracing::error!(mission = %state.mission_id, error = %e, "message not composable");
            Vec::new()
        }
    }
}
