//! Clocks and deadline planning.
//!
//! The wake plan is recomputed from mission state alone; there is no timer
//! state to lose across restarts. Exactly-once firing comes from the event
//! log, which admits one `PhaseTransitioned` per target phase.

use std::collections::BTreeSet;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use chrono::{TimeDelta, Utc};

use crate::engine::{Engine, EngineError, TickReport};
use crate::ids::MissionId;
use crate::mission::{remaining_triggers, MissionState, Phase};
use crate::time::Timestamp;

pub trait Clock: Send + Sync {
    /// Non-decreasing across calls on one instance.
    fn now(&self) -> Timestamp;
}

/// System time, clamped so it never runs backwards.
#[derive(Debug, Default)]
pub struct WallClock {
    last: Mutex<Option<Timestamp>>,
}

impl WallClock {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Clock for WallClock {
    fn now(&self) -> Timestamp {
        let mut last = self.last.lock().unwrap();
        let now = last.map_or_else(Utc::now, |prev| Utc::now().max(prev));
        *last = Some(now);
        now
    }
}

/// Manually advanced clock for simulations and tests.
#[derive(Debug, Clone)]
pub struct VirtualClock {
    now: Arc<Mutex<Timestamp>>,
}

impl VirtualClock {
    pub fn new(start: Timestamp) -> Self {
        Self {
            now: Arc::new(Mutex::new(start)),
        }
    }

    pub fn advance(&self, by: TimeDelta) {
        assert!(by >= TimeDelta::zero(), "virtual clock cannot run backwards");
        *self.now.lock().unwrap() += by;
    }

    /// Moves to `t`; earlier instants are ignored.
    pub fn set(&self, t: Timestamp) {
        let mut now = self.now.lock().unwrap();
        if t > *now {
            *now = t;
        }
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Timestamp {
        *self.now.lock().unwrap()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct WakeEntry {
    pub trigger_time: Timestamp,
    pub mission_id: MissionId,
    pub target_phase: Phase,
}

/// Every pending trigger across missions, ordered by time then mission.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WakePlan {
    pub entries: BTreeSet<WakeEntry>,
}

impl WakePlan {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn for_mission<'a>(&'a self, id: &'a MissionId) -> impl Iterator<Item = &'a WakeEntry> {
        self.entries.iter().filter(move |e| &e.mission_id == id)
    }
}

/// Derives the plan from mission state; terminal missions contribute nothing.
pub fn plan<'a, I>(states: I) -> WakePlan
where
    I: IntoIterator<Item = &'a MissionState>,
{
    let entries = states
        .into_iter()
        .flat_map(|s| {
            remaining_triggers(s)
                .into_iter()
                .map(|(trigger_time, target_phase)| WakeEntry {
                    trigger_time,
                    mission_id: s.mission_id.clone(),
                    target_phase,
                })
        })
        .collect();
    WakePlan { entries }
}

/// The earliest trigger at or after `now`, or the earliest overdue one so
/// that a tick runs immediately.
pub fn next_wake(plan: &WakePlan, _now: Timestamp) -> Option<Timestamp> {
    // entries are time-ordered; any overdue entry is also the minimum
    plan.entries.iter().next().map(|e| e.trigger_time)
}

/// Fires everything due on `clock`.
pub fn tick(clock: &dyn Clock, engine: &Engine) -> Result<TickReport, EngineError> {
    engine.tick(clock.now())
}

/// How long the loop may sleep: until the next wake, at most `max_sleep`.
pub fn sleep_for(plan: &WakePlan, now: Timestamp, max_sleep: TimeDelta) -> Duration {
    let until = next_wake(plan, now).map_or(max_sleep, |w| (w - now).max(TimeDelta::zero()));
    until
        .min(max_sleep)
        .to_std()
        .unwrap_or(Duration::ZERO)
}

/// Ingest and tick until `stop` is set. `wake` cuts a sleep short, e.g. when
/// inbound posts arrive.
pub fn run_loop(
    engine: &Engine,
    clock: &dyn Clock,
    stop: &AtomicBool,
    wake: &std::sync::mpsc::Receiver<()>,
) {
    while !stop.load(Ordering::SeqCst) {
        let now = clock.now();
        if let Err(e) = engine.ingest(now) {
            tracing::warn!(error = %e, "ingest failed");
        }
        match engine.tick(now) {
            Ok(report) => {
                for (mission, event) in &report.fired {
                    tracing::info!(%mission, seq = event.seq, "transition fired");
                }
            }
            Err(e) => tracing::error!(error = %e, "tick failed"),
        }
        let pause = sleep_for(&engine.plan(), clock.now(), engine.config().max_sleep);
        // retries are due sooner than the next trigger
        let pause = engine
            .next_retry()
            .map(|r| pause.min((r - clock.now()).to_std().unwrap_or(Duration::ZERO)))
            .unwrap_or(pause);
        let _ = wake.recv_timeout(pause);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mission::{create_mission, submit_idea, Hashtag, MissionSpec, Timing};
    use chrono::TimeZone;

    fn t0() -> Timestamp {
        Utc.with_ymd_and_hms(2026, 5, 2, 9, 0, 0).unwrap()
    }

    fn mission(n: u64, sel: TimeDelta) -> MissionState {
        let spec = MissionSpec {
            name: "Park cleanup".into(),
            rationale: String::new(),
            hashtag: Hashtag::parse("#parkday").unwrap(),
            selection_deadline: t0() + sel,
            execution_time: t0() + sel + TimeDelta::hours(24),
            creator: "ana".into(),
        };
        create_mission(MissionId::sequential(n), spec, t0(), &Timing::default(), "@wedo")
            .unwrap()
            .0
    }

    #[test]
    fn ideation_mission_has_four_entries() {
        let p = plan([&mission(1, TimeDelta::hours(24))]);
        assert_eq!(p.len(), 4);
    }

    #[test]
    fn terminal_mission_has_none() {
        let mut s = mission(1, TimeDelta::hours(24));
        for e in crate::mission::due_transitions(&s, t0() + TimeDelta::days(5)) {
            s.apply(&e).unwrap();
        }
        assert_eq!(s.phase, Phase::Failed);
        assert!(plan([&s]).is_empty());
    }

    #[test]
    fn short_mission_prompts_at_half_span() {
        // 3h to the deadline: min(4h, 1h30m) = 1h30m after creation
        let p = plan([&mission(1, TimeDelta::hours(3))]);
        let first = p.entries.iter().next().unwrap();
        assert_eq!(first.target_phase, Phase::Voting);
        assert_eq!(first.trigger_time, t0() + TimeDelta::minutes(90));
    }

    #[test]
    fn next_wake_cases() {
        let mut s = mission(1, TimeDelta::hours(24));
        for e in submit_idea(&s, &"bo".into(), "litter", t0(), None).unwrap() {
            s.apply(&e).unwrap();
        }
        let p = plan([&s]);
        assert_eq!(next_wake(&p, t0()), Some(t0() + TimeDelta::hours(4)));
        assert_eq!(next_wake(&WakePlan::default(), t0()), None);
        // overdue: the earliest entry, so the tick runs now
        assert_eq!(
            next_wake(&p, t0() + TimeDelta::days(9)),
            Some(t0() + TimeDelta::hours(4))
        );
        assert_eq!(
            sleep_for(&p, t0() + TimeDelta::days(9), TimeDelta::seconds(30)),
            Duration::ZERO
        );
        assert_eq!(
            sleep_for(&p, t0(), TimeDelta::seconds(30)),
            Duration::from_secs(30)
        );
    }

    #[test]
    fn plan_orders_ties_by_mission_id() {
        let a = mission(2, TimeDelta::hours(24));
        let b = mission(1, TimeDelta::hours(24));
        let p = plan([&a, &b]);
        let first_two: Vec<_> = p.entries.iter().take(2).map(|e| e.mission_id.clone()).collect();
        assert_eq!(first_two, vec![MissionId::sequential(1), MissionId::sequential(2)]);
    }

    #[test]
    fn virtual_clock_is_monotone() {
        let c = VirtualClock::new(t0());
        c.advance(TimeDelta::hours(1));
        c.set(t0());
        assert_eq!(c.now(), t0() + TimeDelta::hours(1));
        let w = WallClock::new();
        assert!(w.now() <= w.now());
    }
}
