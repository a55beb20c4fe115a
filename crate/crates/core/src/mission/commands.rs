use std::collections::BTreeSet;

use super::event::EventKind;
use super::{
    select_winner, Event, EventBody, MissionError, MissionSpec, MissionState, Phase, Schedule,
    Timing, VoteKind,
};
use crate::ids::{IdeaId, MissionId, ParticipantId, PostId};
use crate::protocol::canonicalize;
use crate::time::Timestamp;

fn next_event(state: &MissionState, now: Timestamp, body: EventBody) -> Event {
    Event {
        seq: state.last_seq + 1,
        mission_id: state.mission_id.clone(),
        at: now.max(state.last_at),
        body,
        provenance: None,
    }
}

fn require(state: &MissionState, ok: bool, kind: EventKind) -> Result<(), MissionError> {
    if ok {
        Ok(())
    } else {
        Err(MissionError::IllegalInPhase {
            phase: state.phase,
            kind,
        })
    }
}

/// Validates the form and produces the genesis event.
pub fn create_mission(
    mission_id: MissionId,
    spec: MissionSpec,
    now: Timestamp,
    timing: &Timing,
    bot_handle: &str,
) -> Result<(MissionState, Event), MissionError> {
    let spec = spec.validated(now)?;
    let schedule = Schedule::derive(&spec, now, timing);
    let event = Event {
        seq: 1,
        mission_id,
        at: now,
        body: EventBody::MissionCreated {
            spec,
            schedule,
            bot_handle: bot_handle.to_string(),
            kickoff_text: None,
        },
        provenance: None,
    };
    let state = MissionState::genesis(&event)?;
    Ok((state, event))
}

/// A new canonical key becomes an idea; a known key becomes an endorsement
/// of the existing idea by the submitter.
pub fn submit_idea(
    state: &MissionState,
    author: &ParticipantId,
    raw_text: &str,
    now: Timestamp,
    source_post: Option<PostId>,
) -> Result<Vec<Event>, MissionError> {
    require(
        state,
        state.phase.accepts_contributions(),
        EventKind::IdeaSubmitted,
    )?;
    let key = canonicalize(raw_text, state.spec.hashtag.as_str(), &state.bot_handle);
    if key.is_empty() {
        return Err(MissionError::EmptyAfterCanonicalization);
    }
    match state.idea_by_key(&key) {
        Some(existing) => cast_vote(
            state,
            author,
            existing.idea_id,
            VoteKind::Resubmission,
            now,
            source_post,
        ),
        None => Ok(vec![next_event(
            state,
            now,
            EventBody::IdeaSubmitted {
                idea_id: state.next_idea_id(),
                canonical_key: key,
                display_text: raw_text.trim().to_string(),
                author: author.clone(),
                source_post,
            },
        )]),
    }
}

/// Repeat endorsements by the same voter are absorbed without an event.
pub fn cast_vote(
    state: &MissionState,
    voter: &ParticipantId,
    idea_id: IdeaId,
    kind: VoteKind,
    now: Timestamp,
    source_post: Option<PostId>,
) -> Result<Vec<Event>, MissionError> {
    require(
        state,
        state.phase.accepts_contributions(),
        EventKind::VoteCast,
    )?;
    let idea = state
        .idea(idea_id)
        .ok_or(MissionError::UnknownIdea(idea_id))?;
    if idea.endorsers.contains(voter) {
        return Ok(Vec::new());
    }
    Ok(vec![next_event(
        state,
        now,
        EventBody::VoteCast {
            idea_id,
            voter: voter.clone(),
            via: kind,
            source_post,
        },
    )])
}

pub fn add_detail(
    state: &MissionState,
    author: &ParticipantId,
    text: &str,
    now: Timestamp,
    source_post: Option<PostId>,
) -> Result<Vec<Event>, MissionError> {
    require(state, state.phase.accepts_details(), EventKind::DetailAdded)?;
    let text = text.trim();
    if text.is_empty() {
        return Err(MissionError::EmptyDetail);
    }
    Ok(vec![next_event(
        state,
        now,
        EventBody::DetailAdded {
            author: author.clone(),
            text: text.to_string(),
            source_post,
        },
    )])
}

/// Replaces the participant's phase subscriptions; an empty set unsubscribes.
pub fn subscribe(
    state: &MissionState,
    participant: &ParticipantId,
    phases: BTreeSet<Phase>,
    now: Timestamp,
) -> Result<Vec<Event>, MissionError> {
    require(
        state,
        !state.phase.is_terminal(),
        EventKind::SubscriptionChanged,
    )?;
    let current = state.subscriptions.get(participant);
    let unchanged = match current {
        Some(set) => *set == phases,
        None => phases.is_empty(),
    };
    if unchanged {
        return Ok(Vec::new());
    }
    Ok(vec![next_event(
        state,
        now,
        EventBody::SubscriptionChanged {
            participant: participant.clone(),
            phases,
        },
    )])
}

pub fn cancel(
    state: &MissionState,
    by: &ParticipantId,
    now: Timestamp,
) -> Result<Vec<Event>, MissionError> {
    require(
        state,
        !state.phase.is_terminal(),
        EventKind::MissionCancelled,
    )?;
    Ok(vec![next_event(
        state,
        now,
        EventBody::MissionCancelled { by: by.clone() },
    )])
}

/// The next scheduled transition out of the current phase.
pub fn next_trigger(state: &MissionState) -> Option<(Timestamp, Phase)> {
    let s = &state.schedule;
    match state.phase {
        Phase::Ideation => Some((s.voting_prompt_at, Phase::Voting)),
        Phase::Voting if state.ideas.is_empty() => Some((s.selection_deadline, Phase::Failed)),
        Phase::Voting => Some((s.selection_deadline, Phase::Planning)),
        Phase::Planning => Some((s.reminder_at, Phase::ActionPending)),
        Phase::ActionPending => Some((s.execution_time, Phase::Completed)),
        Phase::Completed | Phase::Failed | Phase::Cancelled => None,
    }
}

/// Every transition still ahead of the mission. The selection target reflects
/// the ideas known now; the two post-selection triggers are listed even when
/// the mission would currently fail, since ideas may still arrive.
pub fn remaining_triggers(state: &MissionState) -> Vec<(Timestamp, Phase)> {
    let s = &state.schedule;
    let selection_target = if state.ideas.is_empty() {
        Phase::Failed
    } else {
        Phase::Planning
    };
    let all = [
        (s.voting_prompt_at, Phase::Voting),
        (s.selection_deadline, selection_target),
        (s.reminder_at, Phase::ActionPending),
        (s.execution_time, Phase::Completed),
    ];
    let skip = match state.phase {
        Phase::Ideation => 0,
        Phase::Voting => 1,
        Phase::Planning => 2,
        Phase::ActionPending => 3,
        _ => return Vec::new(),
    };
    all[skip..].to_vec()
}

/// Every transition whose trigger time is at or before `now`, in order.
/// Each event is stamped with its trigger time (or the previous event's time
/// if later), never earlier than the trigger.
pub fn due_transitions(state: &MissionState, now: Timestamp) -> Vec<Event> {
    let mut scratch = state.clone();
    let mut out = Vec::new();
    while let Some((trigger_at, to)) = next_trigger(&scratch) {
        if trigger_at > now {
            break;
        }
        let winner = match to {
            Phase::Planning => select_winner(&scratch),
            _ => None,
        };
        let event = next_event(
            &scratch,
            trigger_at,
            EventBody::PhaseTransitioned {
                from: scratch.phase,
                to,
                trigger_at,
                winner,
            },
        );
        scratch
            .apply(&event)
            .expect("scheduled transition is legal by construction");
        out.push(event);
    }
    out
}
