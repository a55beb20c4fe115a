use std::fmt;

use chrono::TimeDelta;
use serde::{Deserialize, Serialize};

use super::MissionError;
use crate::ids::ParticipantId;
use crate::time::Timestamp;

pub const MAX_NAME_CHARS: usize = 60;
pub const MAX_HASHTAG_BODY: usize = 30;

/// Lowercase mission hashtag, `#[a-z0-9_]{1,30}`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Hashtag(String);

impl Hashtag {
    /// Lowercases, then validates against the token grammar.
    pub fn parse(raw: &str) -> Result<Self, MissionError> {
        let lowered = raw.to_lowercase();
        let body = lowered
            .strip_prefix('#')
            .ok_or_else(|| MissionError::InvalidHashtag(raw.to_string()))?;
        let valid = (1..=MAX_HASHTAG_BODY).contains(&body.len())
            && body
                .bytes()
                .all(|b| b.is_ascii_lowercase() || b.is_ascii_digit() || b == b'_');
        if valid {
            Ok(Self(lowered))
        } else {
            Err(MissionError::InvalidHashtag(raw.to_string()))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Hashtag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl TryFrom<String> for Hashtag {
    type Error = MissionError;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        Self::parse(&s)
    }
}

impl From<Hashtag> for String {
    fn from(h: Hashtag) -> Self {
        h.0
    }
}

/// The mission creation form.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissionSpec {
    pub name: String,
    /// "This mission is important to me because ..."
    pub rationale: String,
    pub hashtag: Hashtag,
    pub selection_deadline: Timestamp,
    pub execution_time: Timestamp,
    pub creator: ParticipantId,
}

impl MissionSpec {
    /// Checks every creation invariant relative to `now` and returns the spec
    /// with its name trimmed.
    pub fn validated(mut self, now: Timestamp) -> Result<Self, MissionError> {
        let name = self.name.trim();
        if name.is_empty() {
            return Err(MissionError::EmptyName);
        }
        let chars = name.chars().count();
        if chars > MAX_NAME_CHARS {
            return Err(MissionError::NameTooLong(chars));
        }
        self.name = name.to_string();
        self.rationale = self.rationale.trim().to_string();
        if now >= self.selection_deadline {
            return Err(MissionError::InvalidSchedule(
                "selection deadline must be in the future".into(),
            ));
        }
        if self.selection_deadline >= self.execution_time {
            return Err(MissionError::InvalidSchedule(
                "selection deadline must precede execution time".into(),
            ));
        }
        Ok(self)
    }
}

/// Scheduling knobs frozen into a mission at creation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Timing {
    pub default_ideation: TimeDelta,
    pub reminder_lead: TimeDelta,
}

impl Default for Timing {
    fn default() -> Self {
        Self {
            default_ideation: TimeDelta::hours(4),
            reminder_lead: TimeDelta::hours(1),
        }
    }
}

/// Every trigger time of a mission, fixed when it is created.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub created_at: Timestamp,
    pub voting_prompt_at: Timestamp,
    pub selection_deadline: Timestamp,
    pub reminder_at: Timestamp,
    pub execution_time: Timestamp,
}

impl Schedule {
    /// The voting prompt goes out after `default_ideation` or half the span to
    /// the selection deadline, whichever is sooner. The reminder never
    /// precedes the selection deadline.
    pub fn derive(spec: &MissionSpec, created_at: Timestamp, timing: &Timing) -> Self {
        let half_span = (spec.selection_deadline - created_at) / 2;
        let ideation = timing.default_ideation.min(half_span);
        let reminder_at = (spec.execution_time - timing.reminder_lead).max(spec.selection_deadline);
        Self {
            created_at,
            voting_prompt_at: created_at + ideation,
            selection_deadline: spec.selection_deadline,
            reminder_at,
            execution_time: spec.execution_time,
        }
    }
}
