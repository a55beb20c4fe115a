//! Read models served over HTTP. Every view is a pure function of mission
//! state and the current time.

use serde::{Deserialize, Serialize};

use crate::ids::{IdeaId, MissionId, ParticipantId, PostId};
use crate::mission::{
    contributor_ranking, next_trigger, tally, Detail, MissionState, Phase, Schedule, TimelineEntry,
};
use crate::persistence::MissionListing;
use crate::protocol::MessageKind;
use crate::time::Timestamp;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdeaView {
    pub idea_id: IdeaId,
    pub display_text: String,
    pub author: ParticipantId,
    pub votes: usize,
    /// 1-based position in tally order.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineGroup {
    pub phase: Phase,
    pub entries: Vec<TimelineEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leader {
    pub participant: ParticipantId,
    pub score: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MessageView {
    pub kind: MessageKind,
    pub post_id: PostId,
    pub text: String,
    pub at: Timestamp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissionView {
    pub mission_id: MissionId,
    pub name: String,
    pub rationale: String,
    pub hashtag: String,
    pub creator: ParticipantId,
    pub selection_deadline: Timestamp,
    pub execution_time: Timestamp,
    pub schedule: Schedule,
    pub phase: Phase,
    /// Absent once the mission is terminal.
    pub next_stage: Option<Phase>,
    pub seconds_to_next_stage: Option<i64>,
    pub ideas: Vec<IdeaView>,
    pub winner: Option<IdeaId>,
    pub details: Vec<Detail>,
    pub messages: Vec<MessageView>,
    pub timeline: Vec<TimelineGroup>,
    pub leaders: Vec<Leader>,
}

/// Seconds until the next phase change, floored at zero; absent when the
/// mission is terminal.
pub fn seconds_to_next_stage(state: &MissionState, now: Timestamp) -> Option<i64> {
    next_trigger(state).map(|(t, _)| (t - now).num_seconds().max(0))
}

pub fn idea_views(state: &MissionState) -> Vec<IdeaView> {
    tally(state)
        .entries()
        .iter()
        .enumerate()
        .filter_map(|(i, e)| {
            let idea = state.idea(e.idea_id)?;
            Some(IdeaView {
                idea_id: idea.idea_id,
                display_text: idea.display_text.clone(),
                author: idea.author.clone(),
                votes: e.votes,
                rank: i + 1,
            })
        })
        .collect()
}

/// Timeline entries grouped by phase, groups in phase order, entries in log
/// order; phases without entries are omitted.
pub fn timeline(state: &MissionState) -> Vec<TimelineGroup> {
    Phase::ALL
        .into_iter()
        .filter_map(|phase| {
            let entries: Vec<_> = state
                .timeline
                .iter()
                .filter(|e| e.phase == phase)
                .cloned()
                .collect();
            (!entries.is_empty()).then_some(TimelineGroup { phase, entries })
        })
        .collect()
}

pub fn leaders(state: &MissionState) -> Vec<Leader> {
    contributor_ranking(state)
        .into_iter()
        .map(|(participant, score)| Leader { participant, score })
        .collect()
}

pub fn build_view(state: &MissionState, now: Timestamp) -> MissionView {
    MissionView {
        mission_id: state.mission_id.clone(),
        name: state.spec.name.clone(),
        rationale: state.spec.rationale.clone(),
        hashtag: state.spec.hashtag.as_str().to_string(),
        creator: state.spec.creator.clone(),
        selection_deadline: state.spec.selection_deadline,
        execution_time: state.spec.execution_time,
        schedule: state.schedule,
        phase: state.phase,
        next_stage: next_trigger(state).map(|(_, p)| p),
        seconds_to_next_stage: seconds_to_next_stage(state, now),
        ideas: idea_views(state),
        winner: state.winner,
        details: state.details.clone(),
        messages: state
            .messages
            .iter()
            .map(|m| MessageView {
                kind: m.kind,
                post_id: m.post_id.clone(),
                text: m.text.clone(),
                at: m.at,
            })
            .collect(),
        timeline: timeline(state),
        leaders: leaders(state),
    }
}

/// Row of `GET /missions`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissionSummary {
    pub mission_id: MissionId,
    pub name: String,
    pub hashtag: String,
    pub phase: Phase,
    pub next_trigger: Option<Timestamp>,
    pub seconds_to_next_stage: Option<i64>,
}

pub fn summary(state: &MissionState, now: Timestamp) -> MissionSummary {
    let listing = MissionListing::of(state);
    MissionSummary {
        mission_id: listing.mission_id,
        name: state.spec.name.clone(),
        hashtag: state.spec.hashtag.as_str().to_string(),
        phase: listing.phase,
        next_trigger: listing.next_trigger,
        seconds_to_next_stage: seconds_to_next_stage(state, now),
    }
}
