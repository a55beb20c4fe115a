//! Executable scenario scripts.
//!
//! A script is UTF-8 text with one JSON object per line. The first line is a
//! header; every following non-blank line has exactly one of the keys
//! `advance`, `inject` or `expect`:
//!
//! ```text
//! {"header":{"clock_start":"2026-05-02T09:00:00Z","mission":{"hashtag":"#parkday","selection_deadline":"PT24H","execution_time":"PT48H"}}}
//! {"inject":{"kind":"PostObserved","payload":{"post_id":"p1","author":"bo","text":"Pick up litter by the pond! #parkday"}}}
//! {"advance":"PT25H"}
//! {"expect":{"phase":"Planning","winner_contains":"litter"}}
//! ```
//!
//! Times in a script are either RFC 3339 timestamps or ISO-8601 durations,
//! the latter meaning an offset from `clock_start`. A post id written as
//! `$Kickoff`, `$VotePrompt`, `$SelectionAnnouncement` or `$ActionReminder`
//! refers to the most recent engine post of that kind.
//!
//! `advance` walks the virtual clock through every wake-up point on the way
//! (triggers and post retries), ingesting and ticking at each, so the result
//! does not depend on how the advance is split.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::Arc;

use chrono::{TimeDelta, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::config::EngineConfig;
use crate::engine::{Engine, EngineError};
use crate::ids::{IdeaId, MissionId, ParticipantId, PostId};
use crate::mission::{Hashtag, MissionSpec, MissionState, Phase};
use crate::persistence::{Store, StoreError};
use crate::protocol::{InboundPost, MessageKind};
use crate::scheduler::{next_wake, Clock, VirtualClock};
use crate::time::{parse_duration, parse_timestamp, Timestamp};
use crate::transport::{
    EndorsementKind, MemorySink, SimulatedFeed, Transport, TransportEvent, WebhookAdapter,
};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("malformed script at line {line}: {reason}")]
    MalformedScript { line: usize, reason: String },
    #[error("engine failed at line {line}: {source}")]
    Engine { line: usize, source: EngineError },
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Which transport the scenario runs against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Adapter {
    #[default]
    Sim,
    /// Webhook adapter with an in-memory sink.
    Webhook,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    clock_start: Option<String>,
    #[serde(default)]
    mission: MissionOverrides,
    #[serde(default)]
    config: Option<EngineConfig>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MissionOverrides {
    name: Option<String>,
    rationale: Option<String>,
    hashtag: Option<String>,
    creator: Option<String>,
    selection_deadline: Option<String>,
    execution_time: Option<String>,
    kickoff_text: Option<String>,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "kind", content = "payload")]
enum Inject {
    PostObserved {
        post_id: Option<String>,
        author: String,
        text: String,
        at: Option<String>,
        repost_of: Option<String>,
        reply_to: Option<String>,
    },
    EndorsementObserved {
        post_id: String,
        author: String,
        kind: EndorsementKind,
        at: Option<String>,
    },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct Expect {
    phase: Option<Phase>,
    winner_contains: Option<String>,
    /// `null` asserts that no winner was selected.
    #[serde(default, deserialize_with = "some_null")]
    winner: Option<Option<IdeaId>>,
    idea_count: Option<usize>,
    votes: Option<BTreeMap<IdeaId, usize>>,
    detail_count: Option<usize>,
    /// Exact sequence of message kinds posted so far.
    posted: Option<Vec<MessageKind>>,
    /// Substring expected in the latest message of each kind.
    message_contains: Option<BTreeMap<MessageKind, String>>,
    /// When the latest message of each kind was posted.
    posted_at: Option<BTreeMap<MessageKind, String>>,
    /// Leading participants of the contributor ranking, in order.
    leaders: Option<Vec<ParticipantId>>,
}

fn some_null<'de, D, T>(d: D) -> Result<Option<Option<T>>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: Deserialize<'de>,
{
    Option::<T>::deserialize(d).map(Some)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
enum Step {
    #[serde(rename = "advance")]
    Advance(String),
    #[serde(rename = "inject")]
    Inject(Value),
    #[serde(rename = "expect")]
    Expect(Value),
}

/// One line of the report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportLine {
    /// Line number of the expect step in the script (1-based).
    pub step: usize,
    pub status: Status,
    pub observed: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
}

#[derive(Debug)]
pub struct ScenarioOutcome {
    pub report: Vec<ReportLine>,
    pub mission_id: MissionId,
    pub final_state: MissionState,
    /// Raw bytes of the mission log after the run.
    pub log: Vec<u8>,
    /// Kinds and texts of everything the transport accepted, in order.
    pub outbound: Vec<(MessageKind, String)>,
    pub engine: Engine,
}

impl ScenarioOutcome {
    pub fn passed(&self) -> bool {
        self.report.iter().all(|l| l.status == Status::Pass)
    }

    /// The report in its line-oriented form.
    pub fn report_text(&self) -> String {
        self.report
            .iter()
            .map(|l| serde_json::to_string(l).expect("serializable") + "\n")
            .collect()
    }
}

fn malformed(line: usize, reason: impl ToString) -> ScenarioError {
    ScenarioError::MalformedScript {
        line,
        reason: reason.to_string(),
    }
}

struct Runner {
    clock: VirtualClock,
    start: Timestamp,
    engine: Engine,
    feed: Option<SimulatedFeed>,
    webhook: Option<Arc<WebhookAdapter>>,
    sink: Option<MemorySink>,
    mission_id: MissionId,
}

impl Runner {
    fn time(&self, spec: &str, line: usize) -> Result<Timestamp, ScenarioError> {
        resolve_time(self.start, spec).ok_or_else(|| malformed(line, format!("bad time {spec:?}")))
    }

    fn engine_err(line: usize) -> impl Fn(EngineError) -> ScenarioError {
        move |source| ScenarioError::Engine { line, source }
    }

    fn step_once(&self, line: usize) -> Result<(), ScenarioError> {
        let now = self.clock.now();
        self.engine.ingest(now).map_err(Self::engine_err(line))?;
        self.engine.tick(now).map_err(Self::engine_err(line))?;
        Ok(())
    }

    fn advance(&self, by: TimeDelta, line: usize) -> Result<(), ScenarioError> {
        let target = self.clock.now() + by;
        loop {
            let now = self.clock.now();
            let wake = [next_wake(&self.engine.plan(), now), self.engine.next_retry()]
                .into_iter()
                .flatten()
                .filter(|w| *w > now && *w <= target)
                .min();
            let Some(w) = wake else { break };
            self.clock.set(w);
            self.step_once(line)?;
        }
        self.clock.set(target);
        self.step_once(line)
    }

    fn resolve_post(&self, id: &str, line: usize) -> Result<PostId, ScenarioError> {
        let Some(symbol) = id.strip_prefix('$') else {
            return Ok(PostId::new(id));
        };
        let kind: MessageKind = serde_json::from_value(Value::String(symbol.into()))
            .map_err(|_| malformed(line, format!("unknown reference {id}")))?;
        let state = self
            .engine
            .state(&self.mission_id)
            .map_err(Self::engine_err(line))?;
        state
            .message_post(kind)
            .cloned()
            .ok_or_else(|| malformed(line, format!("{id} has not been posted yet")))
    }

    fn inject(&self, value: Value, line: usize) -> Result<(), ScenarioError> {
        let inject: Inject = serde_json::from_value(value).map_err(|e| malformed(line, e))?;
        let now = self.clock.now();
        let event = match inject {
            Inject::PostObserved {
                post_id,
                author,
                text,
                at,
                repost_of,
                reply_to,
            } => TransportEvent::PostObserved(InboundPost {
                post_id: PostId::new(post_id.unwrap_or_else(|| format!("u{line}"))),
                author: ParticipantId::new(author),
                text,
                at: at.map(|a| self.time(&a, line)).transpose()?.unwrap_or(now),
                repost_of: repost_of.map(|p| self.resolve_post(&p, line)).transpose()?,
                reply_to: reply_to.map(|p| self.resolve_post(&p, line)).transpose()?,
            }),
            Inject::EndorsementObserved {
                post_id,
                author,
                kind,
                at,
            } => TransportEvent::EndorsementObserved {
                post_id: self.resolve_post(&post_id, line)?,
                author: ParticipantId::new(author),
                kind,
                at: at.map(|a| self.time(&a, line)).transpose()?.unwrap_or(now),
            },
        };
        if let Some(feed) = &self.feed {
            feed.inject(event);
        } else if let Some(webhook) = &self.webhook {
            webhook.inject(event);
        }
        self.step_once(line)
    }

    fn expect(&self, value: Value, line: usize) -> Result<ReportLine, ScenarioError> {
        let expect: Expect = serde_json::from_value(value).map_err(|e| malformed(line, e))?;
        let state = self
            .engine
            .state(&self.mission_id)
            .map_err(Self::engine_err(line))?;
        let mut observed = serde_json::Map::new();
        let mut ok = true;
        let mut check = |key: &str, pass: bool, seen: Value| {
            ok &= pass;
            observed.insert(key.to_string(), seen);
        };
        if let Some(phase) = expect.phase {
            check("phase", state.phase == phase, json!(state.phase));
        }
        let winner_text = state.winner_idea().map(|i| i.display_text.clone());
        if let Some(needle) = &expect.winner_contains {
            let pass = winner_text.as_deref().is_some_and(|t| t.contains(needle.as_str()));
            check("winner_contains", pass, json!(winner_text));
        }
        if let Some(winner) = expect.winner {
            check("winner", state.winner == winner, json!(state.winner));
        }
        if let Some(n) = expect.idea_count {
            check("idea_count", state.ideas.len() == n, json!(state.ideas.len()));
        }
        if let Some(votes) = &expect.votes {
            let seen: BTreeMap<IdeaId, usize> = votes
                .keys()
                .map(|id| (*id, state.idea(*id).map_or(0, |i| i.votes())))
                .collect();
            check("votes", seen == *votes, json!(seen));
        }
        if let Some(n) = expect.detail_count {
            check("detail_count", state.details.len() == n, json!(state.details.len()));
        }
        if let Some(posted) = &expect.posted {
            let seen: Vec<MessageKind> = state.messages.iter().map(|m| m.kind).collect();
            check("posted", seen == *posted, json!(seen));
        }
        if let Some(wanted) = &expect.message_contains {
            let mut seen = BTreeMap::new();
            let mut pass = true;
            for (kind, needle) in wanted {
                let text = state
                    .messages
                    .iter()
                    .rev()
                    .find(|m| m.kind == *kind)
                    .map(|m| m.text.clone());
                pass &= text.as_deref().is_some_and(|t| t.contains(needle.as_str()));
                seen.insert(*kind, text);
            }
            check("message_contains", pass, json!(seen));
        }
        if let Some(wanted) = &expect.posted_at {
            let mut seen = BTreeMap::new();
            let mut pass = true;
            for (kind, when) in wanted {
                let want = self.time(when, line)?;
                let at = state.messages.iter().rev().find(|m| m.kind == *kind).map(|m| m.at);
                pass &= at == Some(want);
                seen.insert(*kind, at);
            }
            check("posted_at", pass, json!(seen));
        }
        if let Some(leaders) = &expect.leaders {
            let ranking = crate::mission::contributor_ranking(&state);
            let seen: Vec<_> = ranking.iter().take(leaders.len()).map(|(p, _)| p.clone()).collect();
            check("leaders", seen == *leaders, json!(seen));
        }
        Ok(ReportLine {
            step: line,
            status: if ok { Status::Pass } else { Status::Fail },
            observed: Value::Object(observed),
        })
    }
}

/// `PT..` offsets are relative to `start`; anything else is RFC 3339.
fn resolve_time(start: Timestamp, spec: &str) -> Option<Timestamp> {
    if spec.starts_with('P') || spec.starts_with('-') {
        let (negative, body) = match spec.strip_prefix('-') {
            Some(rest) => (true, rest),
            None => (false, spec),
        };
        let d = parse_duration(body).ok()?;
        Some(if negative { start - d } else { start + d })
    } else {
        parse_timestamp(spec).ok()
    }
}

fn default_start() -> Timestamp {
    Utc.with_ymd_and_hms(2026, 5, 2, 9, 0, 0).unwrap()
}

/// Runs `script` against a fresh engine whose data lives in `data_dir`.
pub fn run_scenario(
    script: &str,
    data_dir: &Path,
    adapter: Adapter,
) -> Result<ScenarioOutcome, ScenarioError> {
    let mut lines = script
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (header_line, header_text) = lines.next().ok_or_else(|| malformed(1, "empty script"))?;
    let header: Value = serde_json::from_str(header_text).map_err(|e| malformed(header_line, e))?;
    let header: Header = match header.get("header") {
        Some(h) if header.as_object().is_some_and(|o| o.len() == 1) => {
            serde_json::from_value(h.clone()).map_err(|e| malformed(header_line, e))?
        }
        _ => return Err(malformed(header_line, "first line must be {\"header\":{...}}")),
    };
    let start = match &header.clock_start {
        Some(s) => parse_timestamp(s).map_err(|e| malformed(header_line, e))?,
        None => default_start(),
    };
    let time = |s: &Option<String>, default: TimeDelta| -> Result<Timestamp, ScenarioError> {
        match s {
            Some(s) => resolve_time(start, s)
                .ok_or_else(|| malformed(header_line, format!("bad time {s:?}"))),
            None => Ok(start + default),
        }
    };
    let m = &header.mission;
    let spec = MissionSpec {
        name: m.name.clone().unwrap_or_else(|| "Park cleanup".into()),
        rationale: m.rationale.clone().unwrap_or_default(),
        hashtag: Hashtag::parse(m.hashtag.as_deref().unwrap_or("#parkday"))
            .map_err(|e| malformed(header_line, e))?,
        creator: ParticipantId::new(m.creator.as_deref().unwrap_or("organizer")),
        selection_deadline: time(&m.selection_deadline, TimeDelta::hours(24))?,
        execution_time: time(&m.execution_time, TimeDelta::hours(48))?,
    };

    let clock = VirtualClock::new(start);
    let store = Store::open(data_dir)?;
    let config = header.config.unwrap_or_default();
    let (transport, feed, webhook, sink): (Arc<dyn Transport>, _, _, _) = match adapter {
        Adapter::Sim => {
            let feed = SimulatedFeed::new(Arc::new(clock.clone()));
            (Arc::new(feed.clone()), Some(feed), None, None)
        }
        Adapter::Webhook => {
            let sink = MemorySink::default();
            let wh = Arc::new(WebhookAdapter::in_memory(Box::new(sink.clone())));
            (wh.clone(), None, Some(wh), Some(sink))
        }
    };
    let engine =
        Engine::open(config, store.clone(), transport).map_err(Runner::engine_err(header_line))?;
    let created = engine
        .create(spec, m.kickoff_text.clone(), start)
        .map_err(Runner::engine_err(header_line))?;
    let runner = Runner {
        clock,
        start,
        engine,
        feed,
        webhook,
        sink,
        mission_id: created.state.mission_id.clone(),
    };

    let mut report = Vec::new();
    for (line, text) in lines {
        let step: Step = serde_json::from_str(text).map_err(|e| malformed(line, e))?;
        match step {
            Step::Advance(d) => {
                let by = parse_duration(&d).map_err(|e| malformed(line, e))?;
                if by <= TimeDelta::zero() {
                    return Err(malformed(line, "advance must be positive"));
                }
                runner.advance(by, line)?;
            }
            Step::Inject(v) => runner.inject(v, line)?,
            Step::Expect(v) => report.push(runner.expect(v, line)?),
        }
    }

    let final_state = runner
        .engine
        .state(&runner.mission_id)
        .map_err(Runner::engine_err(0))?
        .as_ref()
        .clone();
    let log = std::fs::read(store.log_path(&runner.mission_id)).map_err(StoreError::from)?;
    let outbound = match (&runner.feed, &runner.sink) {
        (Some(feed), _) => feed.published().into_iter().map(|p| (p.kind, p.text)).collect(),
        (_, Some(sink)) => sink
            .delivered()
            .into_iter()
            .map(|r| (r.payload.message, r.payload.text))
            .collect(),
        _ => Vec::new(),
    };
    Ok(ScenarioOutcome {
        report,
        mission_id: runner.mission_id,
        final_state,
        log,
        outbound,
        engine: runner.engine,
    })
}
