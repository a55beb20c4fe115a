#![allow(dead_code)]
pub mod gen;

use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{TimeDelta, TimeZone, Utc};
use wedo_core::engine::Engine;
use wedo_core::mission::{Hashtag, MissionSpec};
use wedo_core::persistence::Store;
use wedo_core::protocol::InboundPost;
use wedo_core::scheduler::{next_wake, Clock, VirtualClock};
use wedo_core::transport::{EndorsementKind, SimulatedFeed, TransportEvent};
use wedo_core::{EngineConfig, EngineError, Timestamp};

pub fn t0() -> Timestamp {
    Utc.with_ymd_and_hms(2026, 5, 2, 9, 0, 0).unwrap()
}

pub fn hours(h: i64) -> TimeDelta {
    TimeDelta::hours(h)
}

pub fn park_spec() -> MissionSpec {
    MissionSpec {
        name: "Park cleanup".into(),
        rationale: "the pond is full of litter".into(),
        hashtag: Hashtag::parse("#parkday").unwrap(),
        selection_deadline: t0() + hours(24),
        execution_time: t0() + hours(48),
        creator: "ana".into(),
    }
}

pub fn post(id: &str, author: &str, text: &str, at: Timestamp) -> TransportEvent {
    TransportEvent::PostObserved(InboundPost {
        post_id: id.into(),
        author: author.into(),
        text: text.into(),
        at,
        repost_of: None,
        reply_to: None,
    })
}

pub fn repost(id: &str, author: &str, text: &str, of: &str, at: Timestamp) -> TransportEvent {
    TransportEvent::PostObserved(InboundPost {
        post_id: id.into(),
        author: author.into(),
        text: text.into(),
        at,
        repost_of: Some(of.into()),
        reply_to: None,
    })
}

pub fn endorse(of: &str, author: &str, kind: EndorsementKind, at: Timestamp) -> TransportEvent {
    TransportEvent::EndorsementObserved {
        post_id: of.into(),
        author: author.into(),
        kind,
        at,
    }
}

/// An engine on a virtual clock and simulated feed that can be torn down
/// and reopened over the same data directory and feed.
pub struct Harness {
    _dir: Option<tempfile::TempDir>,
    pub root: PathBuf,
    pub clock: VirtualClock,
    pub feed: SimulatedFeed,
    engine: Option<Engine>,
    pub restarts: usize,
}

impl Harness {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_path_buf();
        let mut h = Self::at(&root);
        h._dir = Some(dir);
        h
    }

    pub fn at(root: &Path) -> Self {
        let clock = VirtualClock::new(t0());
        let feed = SimulatedFeed::new(Arc::new(clock.clone()));
        let engine = open(root, &feed);
        Self {
            _dir: None,
            root: root.to_path_buf(),
            clock,
            feed,
            engine: Some(engine),
            restarts: 0,
        }
    }

    pub fn engine(&self) -> &Engine {
        self.engine.as_ref().expect("engine is open")
    }

    pub fn store(&self) -> Store {
        Store::open(&self.root).unwrap()
    }

    pub fn now(&self) -> Timestamp {
        self.clock.now()
    }

    /// Simulates a process restart: same data directory, same feed.
    pub fn reopen(&mut self) {
        // the old process is gone, and with it its log locks
        self.engine = None;
        self.engine = Some(open(&self.root, &self.feed));
        self.restarts += 1;
    }

    pub fn step(&self) -> Result<(), EngineError> {
        let now = self.clock.now();
        self.engine().ingest(now)?;
        self.engine().tick(now)?;
        Ok(())
    }

    /// Moves the clock to `target`, stopping at every wake-up on the way.
    pub fn advance_to(&self, target: Timestamp) -> Result<(), EngineError> {
        loop {
            let now = self.clock.now();
            let wake = [next_wake(&self.engine().plan(), now), self.engine().next_retry()]
                .into_iter()
                .flatten()
                .filter(|w| *w > now && *w <= target)
                .min();
            let Some(w) = wake else { break };
            self.clock.set(w);
            self.step()?;
        }
        self.clock.set(target);
        self.step()
    }

    /// Runs `op` until it succeeds, reopening the engine after each
    /// injected crash.
    pub fn retrying<T>(&mut self, mut op: impl FnMut(&Harness) -> Result<T, EngineError>) -> T {
        loop {
            match op(self) {
                Ok(v) => return v,
                Err(EngineError::Crashed) => self.reopen(),
                Err(e) => panic!("unexpected engine error: {e}"),
            }
        }
    }
}

pub fn open(root: &Path, feed: &SimulatedFeed) -> Engine {
    Engine::open(
        EngineConfig::default(),
        Store::open(root).unwrap(),
        Arc::new(feed.clone()),
    )
    .unwrap()
}

pub enum Step {
    Inject(TransportEvent),
    AdvanceTo(Timestamp),
}

/// The park mission as feed traffic: three ideas, four endorsements (one a
/// modified repost), a detail reply, then the clock runs past execution.
pub fn park_steps() -> Vec<Step> {
    use EndorsementKind::*;
    let at = |m: i64| t0() + TimeDelta::minutes(m);
    vec![
        Step::AdvanceTo(at(10)),
        Step::Inject(post("p1", "bo", "Pick up litter by the pond! #parkday", at(10))),
        Step::AdvanceTo(at(30)),
        Step::Inject(post("p2", "cy", "Plant flowers along the path #parkday", at(30))),
        Step::Inject(post("p3", "dee", "paint the benches #parkday", at(30))),
        Step::AdvanceTo(at(5 * 60)),
        Step::Inject(endorse("p1", "cy", Favorite, at(300))),
        Step::Inject(repost("p4", "dee", "RT @bo: pick up LITTER by the pond!! #parkday", "p1", at(300))),
        Step::Inject(endorse("p2", "eve", Repost, at(300))),
        Step::Inject(endorse("p1", "eve", Favorite, at(300))),
        Step::AdvanceTo(t0() + hours(25)),
        Step::AdvanceTo(t0() + hours(49)),
    ]
}

/// Creates the park mission and plays `park_steps`, reopening after every
/// injected crash. Feed injections are not repeated: the feed survives
/// restarts.
pub fn run_park(h: &mut Harness) {
    h.retrying(|h| {
        if h.engine().list().is_empty() {
            h.engine().create(park_spec(), None, t0())?;
        }
        h.step()
    });
    for step in park_steps() {
        match step {
            Step::Inject(e) => {
                h.feed.inject(e);
                h.retrying(|h| h.step());
            }
            Step::AdvanceTo(t) => h.retrying(|h| h.advance_to(t)),
        }
    }
}
