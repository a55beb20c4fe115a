//! Outbound message composition and inbound post classification.

mod canonical;
mod classify;
mod compose;
mod templates;
mod truncate;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use canonical::{canonicalize, contains_token, count_hashtag, count_markers, nfc_len};
pub use classify::{classify, Classified, InboundPost};
pub use compose::{compose, compose_kickoff, format_when, Composer};
pub use templates::{TemplateError, Templates};
pub use truncate::{truncate_to_limit, ELLIPSIS};

use crate::ids::{ParticipantId, PostId};

/// Platform limit, counted in NFC code points.
pub const CHAR_LIMIT: usize = 140;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MessageKind {
    Kickoff,
    VotePrompt,
    SelectionAnnouncement,
    ActionReminder,
}

impl MessageKind {
    pub const ALL: [MessageKind; 4] = [
        MessageKind::Kickoff,
        MessageKind::VotePrompt,
        MessageKind::SelectionAnnouncement,
        MessageKind::ActionReminder,
    ];

    /// The phase marker carried by every message of this kind.
    pub fn marker(self) -> &'static str {
        match self {
            MessageKind::Kickoff => "idea:",
            MessageKind::VotePrompt => "vote:",
            MessageKind::SelectionAnnouncement => "plan:",
            MessageKind::ActionReminder => "go:",
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            MessageKind::Kickoff => "kickoff",
            MessageKind::VotePrompt => "vote_prompt",
            MessageKind::SelectionAnnouncement => "selection",
            MessageKind::ActionReminder => "reminder",
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// All phase markers, in kind order.
pub const MARKERS: [&str; 4] = ["idea:", "vote:", "plan:", "go:"];

/// A composed announcement. `text` is NFC, at most [`CHAR_LIMIT`] code
/// points, holds the mission hashtag once and its own marker once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutboundMessage {
    pub kind: MessageKind,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply_to: Option<PostId>,
    /// Participants subscribed to the phase this message opens.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub notify: BTreeSet<ParticipantId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProtocolError {
    #[error("mandatory tokens alone exceed the {limit}-character limit for {kind}")]
    Uncomposable { kind: MessageKind, limit: usize },
    #[error("cannot compose {0}: mission has no winner")]
    NoWinner(MessageKind),
    #[error("post {0} is not routed to this mission")]
    UnroutablePost(PostId),
}

/// Checks the outbound invariants for `text` against a hashtag.
pub fn check_outbound(kind: MessageKind, text: &str, hashtag: &str) -> bool {
    use unicode_normalization::UnicodeNormalization;
    let nfc: String = text.nfc().collect();
    nfc == text
        && nfc.chars().count() <= CHAR_LIMIT
        && count_hashtag(text, hashtag) == 1
        && MessageKind::ALL.iter().all(|k| {
            let n = count_markers(text, k.marker());
            if *k == kind {
                n == 1
            } else {
                n == 0
            }
        })
}
