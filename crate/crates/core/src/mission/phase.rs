use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Life-cycle phase of a mission. Declaration order is display order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase {
    Ideation,
    Voting,
    Planning,
    ActionPending,
    Completed,
    Failed,
    Cancelled,
}

impl Phase {
    pub const ALL: [Phase; 7] = [
        Phase::Ideation,
        Phase::Voting,
        Phase::Planning,
        Phase::ActionPending,
        Phase::Completed,
        Phase::Failed,
        Phase::Cancelled,
    ];

    pub fn is_terminal(self) -> bool {
        matches!(self, Phase::Completed | Phase::Failed | Phase::Cancelled)
    }

    /// Ideas and votes are accepted until the selection deadline.
    pub fn accepts_contributions(self) -> bool {
        matches!(self, Phase::Ideation | Phase::Voting)
    }

    pub fn accepts_details(self) -> bool {
        matches!(self, Phase::Planning | Phase::ActionPending)
    }

    pub fn can_transition_to(self, to: Phase) -> bool {
        use Phase::*;
        match (self, to) {
            (Ideation, Voting) | (Voting, Planning) | (Voting, Failed) => true,
            (Planning, ActionPending) | (ActionPending, Completed) => true,
            (from, Cancelled) => !from.is_terminal(),
            _ => false,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Ideation => "Ideation",
            Phase::Voting => "Voting",
            Phase::Planning => "Planning",
            Phase::ActionPending => "ActionPending",
            Phase::Completed => "Completed",
            Phase::Failed => "Failed",
            Phase::Cancelled => "Cancelled",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Phase {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Phase::ALL
            .into_iter()
            .find(|p| p.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown phase {s:?}"))
    }
}
