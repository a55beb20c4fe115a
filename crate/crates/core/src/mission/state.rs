use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::event::{EventKind, VoteKind};
use super::{select_winner, Event, EventBody, MissionError, MissionSpec, Phase, Schedule};
use crate::ids::{IdeaId, MissionId, ParticipantId, PostId};
use crate::protocol::{canonicalize, MessageKind};
use crate::time::Timestamp;

/// A proposed action. `canonical_key` is unique within a mission and the
/// author is always among the endorsers.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Idea {
    pub idea_id: IdeaId,
    pub canonical_key: String,
    pub display_text: String,
    pub author: ParticipantId,
    pub first_seen: Timestamp,
    pub endorsers: BTreeSet<ParticipantId>,
}

impl Idea {
    pub fn votes(&self) -> usize {
        self.endorsers.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Detail {
    pub author: ParticipantId,
    pub text: String,
    pub at: Timestamp,
}

/// What a known post carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", content = "ref", rename_all = "snake_case")]
pub enum PostRef {
    Idea(IdeaId),
    Message(MessageKind),
    Detail,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PostedMessage {
    pub kind: MessageKind,
    pub dedup_token: String,
    pub post_id: PostId,
    pub text: String,
    pub at: Timestamp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub from: Phase,
    pub to: Phase,
    pub trigger_at: Timestamp,
    pub at: Timestamp,
}

/// Per-participant contribution counters used by the leader ranking.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contribution {
    /// Rank of this participant's first contribution among all contributors.
    pub order: u32,
    pub ideas: u32,
    pub details: u32,
    /// Ideas endorsed other than the participant's own.
    pub endorsed: BTreeSet<IdeaId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub at: Timestamp,
    pub phase: Phase,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub actor: Option<ParticipantId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

/// Folded state of one mission.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissionState {
    pub mission_id: MissionId,
    pub spec: MissionSpec,
    pub schedule: Schedule,
    pub bot_handle: String,
    pub kickoff_text: Option<String>,
    pub phase: Phase,
    pub ideas: Vec<Idea>,
    pub winner: Option<IdeaId>,
    pub details: Vec<Detail>,
    pub subscriptions: BTreeMap<ParticipantId, BTreeSet<Phase>>,
    pub posts: BTreeMap<PostId, PostRef>,
    pub messages: Vec<PostedMessage>,
    pub transitions: Vec<TransitionRecord>,
    pub contributors: BTreeMap<ParticipantId, Contribution>,
    pub timeline: Vec<TimelineEntry>,
    pub last_seq: u64,
    pub last_at: Timestamp,
}

impl MissionState {
    /// Builds the initial state from a `MissionCreated` event with seq 1.
    pub fn genesis(event: &Event) -> Result<Self, MissionError> {
        let EventBody::MissionCreated {
            spec,
            schedule,
            bot_handle,
            kickoff_text,
        } = &event.body
        else {
            return Err(MissionError::NotCreated);
        };
        if event.seq != 1 {
            return Err(MissionError::SequenceGap {
                expected: 1,
                got: event.seq,
            });
        }
        Ok(Self {
            mission_id: event.mission_id.clone(),
            spec: spec.clone(),
            schedule: *schedule,
            bot_handle: bot_handle.clone(),
            kickoff_text: kickoff_text.clone(),
            phase: Phase::Ideation,
            ideas: Vec::new(),
            winner: None,
            details: Vec::new(),
            subscriptions: BTreeMap::new(),
            posts: BTreeMap::new(),
            messages: Vec::new(),
            transitions: Vec::new(),
            contributors: BTreeMap::new(),
            timeline: vec![TimelineEntry {
                at: event.at,
                phase: Phase::Ideation,
                kind: EventKind::MissionCreated,
                actor: Some(spec.creator.clone()),
                text: Some(spec.name.clone()),
            }],
            last_seq: 1,
            last_at: event.at,
        })
    }

    pub fn idea(&self, id: IdeaId) -> Option<&Idea> {
        // ids are dense from 1
        self.ideas
            .get(id.number().checked_sub(1)? as usize)
            .filter(|i| i.idea_id == id)
    }

    pub fn idea_by_key(&self, key: &str) -> Option<&Idea> {
        self.ideas.iter().find(|i| i.canonical_key == key)
    }

    pub fn winner_idea(&self) -> Option<&Idea> {
        self.winner.and_then(|w| self.idea(w))
    }

    pub fn next_idea_id(&self) -> IdeaId {
        IdeaId::new(self.ideas.len() as u32 + 1)
    }

    /// Post id of the most recent message of `kind`.
    pub fn message_post(&self, kind: MessageKind) -> Option<&PostId> {
        self.messages
            .iter()
            .rev()
            .find(|m| m.kind == kind)
            .map(|m| &m.post_id)
    }

    pub fn subscribers_of(&self, phase: Phase) -> BTreeSet<ParticipantId> {
        self.subscriptions
            .iter()
            .filter(|(_, phases)| phases.contains(&phase))
            .map(|(p, _)| p.clone())
            .collect()
    }

    pub fn has_message_token(&self, token: &str) -> bool {
        self.messages.iter().any(|m| m.dedup_token == token)
    }

    /// Applies one event in place. On error the state is left untouched.
    pub fn apply(&mut self, event: &Event) -> Result<(), MissionError> {
        self.check_envelope(event)?;
        self.check_body(event)?;
        self.mutate(event);
        self.last_seq = event.seq;
        self.last_at = event.at;
        Ok(())
    }

    fn check_envelope(&self, event: &Event) -> Result<(), MissionError> {
        if event.mission_id != self.mission_id {
            return Err(MissionError::MissionMismatch);
        }
        if event.seq != self.last_seq + 1 {
            return Err(MissionError::SequenceGap {
                expected: self.last_seq + 1,
                got: event.seq,
            });
        }
        if event.at < self.last_at {
            return Err(MissionError::NonMonotonicTime);
        }
        Ok(())
    }

    fn illegal(&self, kind: EventKind) -> MissionError {
        MissionError::IllegalInPhase {
            phase: self.phase,
            kind,
        }
    }

    /// A source post may be new, or already known as carrying the same thing.
    fn check_post(&self, post: Option<&PostId>, carries: PostRef) -> Result<(), MissionError> {
        match post {
            Some(p) if self.posts.get(p).is_some_and(|known| *known != carries) => {
                Err(MissionError::DuplicatePost(p.clone()))
            }
            _ => Ok(()),
        }
    }

    fn check_new_post(&self, post: Option<&PostId>) -> Result<(), MissionError> {
        match post {
            Some(p) if self.posts.contains_key(p) => Err(MissionError::DuplicatePost(p.clone())),
            _ => Ok(()),
        }
    }

    fn check_body(&self, event: &Event) -> Result<(), MissionError> {
        let kind = event.kind();
        match &event.body {
            EventBody::MissionCreated { .. } => Err(MissionError::AlreadyCreated),
            EventBody::IdeaSubmitted {
                idea_id,
                canonical_key,
                source_post,
                ..
            } => {
                if !self.phase.accepts_contributions() {
                    return Err(self.illegal(kind));
                }
                if *idea_id != self.next_idea_id() {
                    return Err(MissionError::IdeaIdOutOfOrder(*idea_id));
                }
                if canonical_key.is_empty() {
                    return Err(MissionError::EmptyAfterCanonicalization);
                }
                if canonicalize(canonical_key, self.spec.hashtag.as_str(), &self.bot_handle)
                    != *canonical_key
                {
                    return Err(MissionError::NotCanonical(canonical_key.clone()));
                }
                if self.idea_by_key(canonical_key).is_some() {
                    return Err(MissionError::DuplicateIdea(canonical_key.clone()));
                }
                self.check_new_post(source_post.as_ref())
            }
            EventBody::VoteCast {
                idea_id,
                source_post,
                ..
            } => {
                if !self.phase.accepts_contributions() {
                    return Err(self.illegal(kind));
                }
                if self.idea(*idea_id).is_none() {
                    return Err(MissionError::UnknownIdea(*idea_id));
                }
                self.check_post(source_post.as_ref(), PostRef::Idea(*idea_id))
            }
            EventBody::DetailAdded {
                text, source_post, ..
            } => {
                if !self.phase.accepts_details() {
                    return Err(self.illegal(kind));
                }
                if text.trim().is_empty() {
                    return Err(MissionError::EmptyDetail);
                }
                self.check_new_post(source_post.as_ref())
            }
            EventBody::PhaseTransitioned {
                from,
                to,
                trigger_at,
                winner,
            } => self.check_transition(event, *from, *to, *trigger_at, *winner),
            EventBody::MessagePosted {
                dedup_token,
                post_id,
                ..
            } => {
                if self.has_message_token(dedup_token) {
                    return Err(MissionError::DuplicateMessage(dedup_token.clone()));
                }
                self.check_new_post(Some(post_id))
            }
            EventBody::SubscriptionChanged { .. } | EventBody::MissionCancelled { .. } => {
                if self.phase.is_terminal() {
                    Err(self.illegal(kind))
                } else {
                    Ok(())
                }
            }
        }
    }

    fn check_transition(
        &self,
        event: &Event,
        from: Phase,
        to: Phase,
        trigger_at: Timestamp,
        winner: Option<IdeaId>,
    ) -> Result<(), MissionError> {
        let illegal = MissionError::IllegalTransition { from, to };
        if from != self.phase || to == Phase::Cancelled || !from.can_transition_to(to) {
            return Err(illegal);
        }
        let expected_trigger = match to {
            Phase::Voting => self.schedule.voting_prompt_at,
            Phase::Planning | Phase::Failed => self.schedule.selection_deadline,
            Phase::ActionPending => self.schedule.reminder_at,
            Phase::Completed => self.schedule.execution_time,
            _ => return Err(illegal),
        };
        if trigger_at != expected_trigger {
            return Err(MissionError::WrongTrigger { to, trigger_at });
        }
        if event.at < trigger_at {
            return Err(MissionError::EarlyTransition { to, trigger_at });
        }
        let expected_winner = match to {
            Phase::Planning => match select_winner(self) {
                Some(w) => Some(w),
                None => return Err(illegal),
            },
            Phase::Failed if !self.ideas.is_empty() => return Err(illegal),
            _ => None,
        };
        if winner != expected_winner {
            return Err(MissionError::WinnerMismatch {
                expected: expected_winner,
                got: winner,
            });
        }
        Ok(())
    }

    fn touch_contributor(&mut self, who: &ParticipantId) -> &mut Contribution {
        let next = self.contributors.len() as u32;
        self.contributors
            .entry(who.clone())
            .or_insert_with(|| Contribution {
                order: next,
                ..Contribution::default()
            })
    }

    fn push_timeline(&mut self, event: &Event, actor: Option<&ParticipantId>, text: Option<&str>) {
        self.timeline.push(TimelineEntry {
            at: event.at,
            phase: self.phase,
            kind: event.kind(),
            actor: actor.cloned(),
            text: text.map(str::to_string),
        });
    }

    fn mutate(&mut self, event: &Event) {
        match &event.body {
            EventBody::MissionCreated { .. } => unreachable!("rejected by check_body"),
            EventBody::IdeaSubmitted {
                idea_id,
                canonical_key,
                display_text,
                author,
                source_post,
            } => {
                self.ideas.push(Idea {
                    idea_id: *idea_id,
                    canonical_key: canonical_key.clone(),
                    display_text: display_text.clone(),
                    author: author.clone(),
                    first_seen: event.at,
                    endorsers: BTreeSet::from([author.clone()]),
                });
                if let Some(p) = source_post {
                    self.posts.insert(p.clone(), PostRef::Idea(*idea_id));
                }
                self.touch_contributor(author).ideas += 1;
                self.push_timeline(event, Some(author), Some(display_text));
            }
            EventBody::VoteCast {
                idea_id,
                voter,
                via,
                source_post,
            } => {
                if let Some(p) = source_post {
                    self.posts.insert(p.clone(), PostRef::Idea(*idea_id));
                }
                let idx = idea_id.number() as usize - 1;
                if self.ideas[idx].endorsers.insert(voter.clone()) {
                    self.touch_contributor(voter).endorsed.insert(*idea_id);
                    let label = match via {
                        VoteKind::Repost => "repost",
                        VoteKind::Favorite => "favorite",
                        VoteKind::Resubmission => "resubmission",
                    };
                    let text = format!("{label} of {idea_id}");
                    self.push_timeline(event, Some(voter), Some(&text));
                }
            }
            EventBody::DetailAdded {
                author,
                text,
                source_post,
            } => {
                self.details.push(Detail {
                    author: author.clone(),
                    text: text.clone(),
                    at: event.at,
                });
                if let Some(p) = source_post {
                    self.posts.insert(p.clone(), PostRef::Detail);
                }
                self.touch_contributor(author).details += 1;
                self.push_timeline(event, Some(author), Some(text));
            }
            EventBody::PhaseTransitioned {
                from,
                to,
                trigger_at,
                winner,
            } => {
                self.phase = *to;
                if *to == Phase::Planning {
                    self.winner = *winner;
                }
                self.transitions.push(TransitionRecord {
                    from: *from,
                    to: *to,
                    trigger_at: *trigger_at,
                    at: event.at,
                });
                let text = winner
                    .and_then(|w| self.idea(w))
                    .map(|i| i.display_text.clone());
                self.push_timeline(event, None, text.as_deref());
            }
            EventBody::MessagePosted {
                message,
                dedup_token,
                post_id,
                text,
            } => {
                self.posts.insert(post_id.clone(), PostRef::Message(*message));
                self.messages.push(PostedMessage {
                    kind: *message,
                    dedup_token: dedup_token.clone(),
                    post_id: post_id.clone(),
                    text: text.clone(),
                    at: event.at,
                });
                self.push_timeline(event, None, Some(text));
            }
            EventBody::SubscriptionChanged {
                participant,
                phases,
            } => {
                if phases.is_empty() {
                    self.subscriptions.remove(participant);
                } else {
                    self.subscriptions.insert(participant.clone(), phases.clone());
                }
                self.push_timeline(event, Some(participant), None);
            }
            EventBody::MissionCancelled { by } => {
                let from = self.phase;
                self.phase = Phase::Cancelled;
                self.winner = None;
                self.transitions.push(TransitionRecord {
                    from,
                    to: Phase::Cancelled,
                    trigger_at: event.at,
                    at: event.at,
                });
                self.push_timeline(event, Some(by), None);
            }
        }
    }
}

/// Pure reducer: returns the successor state or an error.
pub fn apply_event(state: &MissionState, event: &Event) -> Result<MissionState, MissionError> {
    let mut next = state.clone();
    next.apply(event)?;
    Ok(next)
}

/// Folds a complete log, starting from its `MissionCreated` record.
pub fn replay<'a, I>(events: I) -> Result<MissionState, MissionError>
where
    I: IntoIterator<Item = &'a Event>,
{
    let mut iter = events.into_iter();
    let first = iter.next().ok_or(MissionError::NotCreated)?;
    let mut state = MissionState::genesis(first)?;
    for event in iter {
        state.apply(event)?;
    }
    Ok(state)
}
