//! Mission engine for participatory, end-to-end collective action.
//!
//! A mission moves through ideation, voting, planning and action over a
//! microblog-style feed. Everything a mission knows is derived by folding an
//! append-only event log; the scheduler fires deadline transitions exactly
//! once, and the transport layer abstracts the social feed behind a port with
//! a deterministic simulated implementation.
//!
//! Module map:
//!
//! - [`mission`]: the pure state machine (spec validation, events, reducer,
//!   tally, winner selection, due transitions, contributor ranking).
//! - [`protocol`]: canonicalization, classification of inbound posts and
//!   composition of outbound messages under the character limit.
//! - [`scheduler`]: clocks, wake plans and the tick loop.
//! - [`transport`]: the feed port, simulated feed and webhook adapter.
//! - [`persistence`]: checksummed line logs, cursors and snapshots.
//! - [`engine`]: single-writer command path tying the above together.
//! - [`view`]: read models for the HTTP surface.
//! - [`scenario`]: executable line-oriented scenario scripts.

pub mod config;
pub mod engine;
pub mod ids;
pub mod mission;
pub mod persistence;
pub mod protocol;
pub mod scenario;
pub mod scheduler;
pub mod time;
pub mod transport;
pub mod view;

pub use config::EngineConfig;
pub use engine::{Engine, EngineError};
pub use ids::{IdeaId, MissionId, ParticipantId, PostId};
pub use mission::{Event, EventBody, MissionSpec, MissionState, Phase};
pub use protocol::{MessageKind, OutboundMessage};
pub use time::Timestamp;
