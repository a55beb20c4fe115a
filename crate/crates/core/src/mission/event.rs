use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{MissionSpec, Phase, Schedule};
use crate::ids::{IdeaId, MissionId, ParticipantId, PostId};
use crate::protocol::MessageKind;
use crate::time::Timestamp;

/// An append-only fact about one mission. The log of these is the only
/// source of mission state.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub seq: u64,
    pub mission_id: MissionId,
    pub at: Timestamp,
    #[serde(flatten)]
    pub body: EventBody,
    /// Where the event came from. Not part of mission state.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<Provenance>,
}

impl Event {
    pub fn kind(&self) -> EventKind {
        self.body.kind()
    }

    pub fn with_provenance(mut self, p: Provenance) -> Self {
        self.provenance = Some(p);
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "payload")]
pub enum EventBody {
    MissionCreated {
        spec: MissionSpec,
        schedule: Schedule,
        bot_handle: String,
        kickoff_text: Option<String>,
    },
    IdeaSubmitted {
        idea_id: IdeaId,
        canonical_key: String,
        display_text: String,
        author: ParticipantId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        source_post: Option<PostId>,
    },
    VoteCast {
        idea_id: IdeaId,
        voter: ParticipantId,
        via: VoteKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        source_post: Option<PostId>,
    },
    DetailAdded {
        author: ParticipantId,
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        source_post: Option<PostId>,
    },
    PhaseTransitioned {
        from: Phase,
        to: Phase,
        trigger_at: Timestamp,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        winner: Option<IdeaId>,
    },
    MessagePosted {
        message: MessageKind,
        dedup_token: String,
        post_id: PostId,
        text: String,
    },
    SubscriptionChanged {
        participant: ParticipantId,
        phases: BTreeSet<Phase>,
    },
    MissionCancelled {
        by: ParticipantId,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventKind {
    MissionCreated,
    IdeaSubmitted,
    VoteCast,
    DetailAdded,
    PhaseTransitioned,
    MessagePosted,
    SubscriptionChanged,
    MissionCancelled,
}

impl EventBody {
    pub fn kind(&self) -> EventKind {
        match self {
            EventBody::MissionCreated { .. } => EventKind::MissionCreated,
            EventBody::IdeaSubmitted { .. } => EventKind::IdeaSubmitted,
            EventBody::VoteCast { .. } => EventKind::VoteCast,
            EventBody::DetailAdded { .. } => EventKind::DetailAdded,
            EventBody::PhaseTransitioned { .. } => EventKind::PhaseTransitioned,
            EventBody::MessagePosted { .. } => EventKind::MessagePosted,
            EventBody::SubscriptionChanged { .. } => EventKind::SubscriptionChanged,
            EventBody::MissionCancelled { .. } => EventKind::MissionCancelled,
        }
    }
}

/// How an endorsement was expressed. Every kind counts once per voter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoteKind {
    Repost,
    Favorite,
    /// Another submission whose canonical key matched an existing idea.
    Resubmission,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case")]
pub enum Provenance {
    Api,
    Scheduler,
    Transport { name: String, position: u64 },
}
