//! Pure, event-sourced mission state machine.
//!
//! Commands (`create_mission`, `submit_idea`, `cast_vote`, ...) inspect a
//! [`MissionState`] and return the events they would produce; only
//! [`MissionState::apply`] mutates state. Nothing here reads a clock.

mod commands;
mod event;
mod phase;
mod ranking;
mod spec;
mod state;
mod tally;

use thiserror::Error;

pub use commands::{
    add_detail, cancel, cast_vote, create_mission, due_transitions, next_trigger, remaining_triggers,
    submit_idea, subscribe,
};
pub use event::{Event, EventBody, EventKind, Provenance, VoteKind};
pub use phase::Phase;
pub use ranking::contributor_ranking;
pub use spec::{Hashtag, MissionSpec, Schedule, Timing, MAX_HASHTAG_BODY, MAX_NAME_CHARS};
pub use state::{
    apply_event, replay, Contribution, Detail, Idea, MissionState, PostRef, PostedMessage,
    TimelineEntry, TransitionRecord,
};
pub use tally::{select_winner, tally, Tally, TallyEntry};

use crate::ids::IdeaId;
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MissionError {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("invalid hashtag {0:?}: expected #[a-z0-9_]{{1,30}}")]
    InvalidHashtag(String),
    #[error("mission name is empty")]
    EmptyName,
    #[error("mission name has {0} code points, the limit is 60")]
    NameTooLong(usize),
    #[error("text is empty after canonicalization")]
    EmptyAfterCanonicalization,
    #[error("{kind:?} is not allowed in phase {phase}")]
    IllegalInPhase { phase: Phase, kind: EventKind },
    #[error("unknown idea {0}")]
    UnknownIdea(IdeaId),
    #[error("sequence gap: expected seq {expected}, got {got}")]
    SequenceGap { expected: u64, got: u64 },
    #[error("event timestamp precedes the previous event")]
    NonMonotonicTime,
    #[error("event belongs to a different mission")]
    MissionMismatch,
    #[error("log does not start with MissionCreated")]
    NotCreated,
    #[error("mission already created")]
    AlreadyCreated,
    #[error("illegal transition {from} -> {to}")]
    IllegalTransition { from: Phase, to: Phase },
    #[error("transition to {to} carries trigger {trigger_at} that does not match the schedule")]
    WrongTrigger { to: Phase, trigger_at: Timestamp },
    #[error("transition to {to} stamped before its trigger {trigger_at}")]
    EarlyTransition { to: Phase, trigger_at: Timestamp },
    #[error("winner mismatch: expected {expected:?}, got {got:?}")]
    WinnerMismatch {
        expected: Option<IdeaId>,
        got: Option<IdeaId>,
    },
    #[error("idea id {0} out of order")]
    IdeaIdOutOfOrder(IdeaId),
    #[error("key {0:?} is not canonical")]
    NotCanonical(String),
    #[error("an idea with key {0:?} already exists")]
    DuplicateIdea(String),
    #[error("post {0} is already known")]
    DuplicatePost(crate::ids::PostId),
    #[error("message {0:?} already posted")]
    DuplicateMessage(String),
    #[error("detail text is empty")]
    EmptyDetail,
}

impl MissionError {
    /// Stable error name used on the wire.
    pub fn code(&self) -> &'static str {
        match self {
            MissionError::InvalidSchedule(_) => "InvalidSchedule",
            MissionError::InvalidHashtag(_) => "InvalidHashtag",
            MissionError::EmptyName => "EmptyName",
            MissionError::NameTooLong(_) => "NameTooLong",
            MissionError::EmptyAfterCanonicalization => "EmptyAfterCanonicalization",
            MissionError::IllegalInPhase { .. } => "IllegalInPhase",
            MissionError::UnknownIdea(_) => "UnknownIdea",
            MissionError::SequenceGap { .. } => "SequenceGap",
            MissionError::NonMonotonicTime => "NonMonotonicTime",
            MissionError::MissionMismatch => "MissionMismatch",
            MissionError::NotCreated => "NotCreated",
            MissionError::AlreadyCreated => "AlreadyCreated",
            MissionError::IllegalTransition { .. } => "IllegalTransition",
            MissionError::WrongTrigger { .. } => "WrongTrigger",
            MissionError::EarlyTransition { .. } => "EarlyTransition",
            MissionError::WinnerMismatch { .. } => "WinnerMismatch",
            MissionError::IdeaIdOutOfOrder(_) => "IdeaIdOutOfOrder",
            MissionError::NotCanonical(_) => "NotCanonical",
            MissionError::DuplicateIdea(_) => "DuplicateIdea",
            MissionError::DuplicatePost(_) => "DuplicatePost",
            MissionError::DuplicateMessage(_) => "DuplicateMessage",
            MissionError::EmptyDetail => "EmptyDetail",
        }
    }
}
