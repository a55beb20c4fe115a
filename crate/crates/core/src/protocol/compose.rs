use unicode_normalization::UnicodeNormalization;

use super::canonical::{nfc_len, strip_markers, strip_token};
use super::templates::{Segment, Slot, Template};
use super::{
    check_outbound, truncate_to_limit, MessageKind, OutboundMessage, ProtocolError, Templates,
    CHAR_LIMIT,
};
use crate::mission::{tally, MissionSpec, MissionState, Phase, Schedule};
use crate::time::Timestamp;

const VOTE_PROMPT_TOP: usize = 3;

/// Human-readable time used in announcements.
pub fn format_when(t: Timestamp) -> String {
    t.format("%a %b %-d %H:%M UTC").to_string()
}

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// Free text with the mission hashtag and all phase markers removed.
fn sanitize(value: &str, hashtag: &str) -> String {
    let mut cur = collapse(&value.nfc().collect::<String>());
    loop {
        let next = collapse(&strip_markers(&strip_token(&cur, hashtag)));
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

struct Fill<'a> {
    hashtag: &'a str,
    fixed: Vec<(Slot, String)>,
    /// Free-text values, most important first.
    free: Vec<(Slot, String)>,
}

impl Fill<'_> {
    fn render(&self, template: &Template, free: &[(Slot, String)]) -> String {
        let lookup = |slot: Slot| -> &str {
            if slot == Slot::Hashtag {
                return self.hashtag;
            }
            self.fixed
                .iter()
                .chain(free.iter())
                .find(|(s, _)| *s == slot)
                .map_or("", |(_, v)| v.as_str())
        };
        let raw: String = template
            .segments
            .iter()
            .map(|seg| match seg {
                Segment::Lit(l) => l.as_str(),
                Segment::Slot(s) => lookup(*s),
            })
            .collect();
        collapse(&raw.nfc().collect::<String>())
    }

    /// Shrinks free text, least important first, until the rendered text
    /// fits and satisfies every outbound invariant.
    fn fit(&self, kind: MessageKind, template: &Template, limit: usize) -> Result<String, ProtocolError> {
        let uncomposable = ProtocolError::Uncomposable { kind, limit };
        let sanitized: Vec<(Slot, String)> = self
            .free
            .iter()
            .map(|(s, v)| (*s, sanitize(v, self.hashtag)))
            .collect();
        let mut budgets: Vec<usize> = sanitized.iter().map(|(_, v)| nfc_len(v)).collect();

        let empty: Vec<(Slot, String)> = sanitized.iter().map(|(s, _)| (*s, String::new())).collect();
        if nfc_len(&self.render(template, &empty)) > limit {
            return Err(uncomposable);
        }

        loop {
            let values: Vec<(Slot, String)> = sanitized
                .iter()
                .zip(&budgets)
                .map(|((slot, v), budget)| {
                    // a lone ellipsis says nothing
                    let cut = if *budget < 2 {
                        String::new()
                    } else {
                        truncate_to_limit(v, *budget)
                    };
                    (*slot, sanitize(&cut, self.hashtag))
                })
                .collect();
            let text = self.render(template, &values);
            let len = text.chars().count();
            if len <= limit && check_outbound(kind, &text, self.hashtag) {
                return Ok(text);
            }
            let Some(i) = budgets.iter().rposition(|b| *b > 0) else {
                return Err(uncomposable);
            };
            let over = len.saturating_sub(limit).max(1);
            budgets[i] = budgets[i].saturating_sub(over);
        }
    }
}

/// Builds outbound messages from templates.
#[derive(Debug, Clone, Default)]
pub struct Composer {
    templates: Templates,
}

impl Composer {
    pub fn new(templates: Templates) -> Self {
        Self { templates }
    }

    pub fn templates(&self) -> &Templates {
        &self.templates
    }

    /// The suggested kickoff for a mission form.
    pub fn kickoff(&self, spec: &MissionSpec, schedule: &Schedule) -> Result<OutboundMessage, ProtocolError> {
        let fill = Fill {
            hashtag: spec.hashtag.as_str(),
            fixed: vec![(Slot::Deadline, format_when(schedule.selection_deadline))],
            free: vec![
                (Slot::Name, spec.name.clone()),
                (Slot::Rationale, spec.rationale.clone()),
            ],
        };
        Ok(OutboundMessage {
            kind: MessageKind::Kickoff,
            text: fill.fit(MessageKind::Kickoff, &self.templates.kickoff, CHAR_LIMIT)?,
            reply_to: None,
            notify: Default::default(),
        })
    }

    /// Composes the messages of `kind` for the mission as it stands. Only
    /// `VotePrompt` can yield more than one message.
    pub fn compose(&self, kind: MessageKind, state: &MissionState) -> Result<Vec<OutboundMessage>, ProtocolError> {
        let hashtag = state.spec.hashtag.as_str();
        let texts = match kind {
            MessageKind::Kickoff => match &state.kickoff_text {
                Some(edited) => vec![edited.clone()],
                None => vec![self.kickoff(&state.spec, &state.schedule)?.text],
            },
            MessageKind::VotePrompt => self.vote_prompts(state)?,
            MessageKind::SelectionAnnouncement | MessageKind::ActionReminder => {
                let winner = state.winner_idea().ok_or(ProtocolError::NoWinner(kind))?;
                let (template, fixed) = if kind == MessageKind::SelectionAnnouncement {
                    (&self.templates.selection, vec![])
                } else {
                    (
                        &self.templates.reminder,
                        vec![(Slot::When, format_when(state.schedule.execution_time))],
                    )
                };
                let fill = Fill {
                    hashtag,
                    fixed,
                    free: vec![(Slot::Idea, winner.display_text.clone())],
                };
                vec![fill.fit(kind, template, CHAR_LIMIT)?]
            }
        };
        let opens = match kind {
            MessageKind::Kickoff => Phase::Ideation,
            MessageKind::VotePrompt => Phase::Voting,
            MessageKind::SelectionAnnouncement => Phase::Planning,
            MessageKind::ActionReminder => Phase::ActionPending,
        };
        let reply_to = match kind {
            MessageKind::Kickoff => None,
            _ => state.message_post(MessageKind::Kickoff).cloned(),
        };
        let notify = state.subscribers_of(opens);
        Ok(texts
            .into_iter()
            .map(|text| OutboundMessage {
                kind,
                text,
                reply_to: reply_to.clone(),
                notify: notify.clone(),
            })
            .collect())
    }

    fn vote_prompts(&self, state: &MissionState) -> Result<Vec<String>, ProtocolError> {
        let kind = MessageKind::VotePrompt;
        let hashtag = state.spec.hashtag.as_str();
        let top: Vec<String> = tally(state)
            .entries()
            .iter()
            .take(VOTE_PROMPT_TOP)
            .filter_map(|e| state.idea(e.idea_id))
            .map(|i| sanitize(&i.display_text, hashtag))
            .collect();
        if top.is_empty() {
            let fill = Fill {
                hashtag,
                fixed: vec![(Slot::Deadline, format_when(state.schedule.selection_deadline))],
                free: vec![],
            };
            return Ok(vec![fill.fit(kind, &self.templates.vote_prompt_empty, CHAR_LIMIT)?]);
        }

        let combined = top
            .iter()
            .enumerate()
            .map(|(i, t)| format!("{}) {t}", i + 1))
            .collect::<Vec<_>>()
            .join(" ");
        let fill = Fill {
            hashtag,
            fixed: vec![],
            free: vec![(Slot::Idea, combined.clone())],
        };
        let whole = fill.render(&self.templates.vote_prompt, &[(Slot::Idea, combined)]);
        if whole.chars().count() <= CHAR_LIMIT && check_outbound(kind, &whole, hashtag) {
            return Ok(vec![whole]);
        }
        top.into_iter()
            .map(|idea| {
                let fill = Fill {
                    hashtag,
                    fixed: vec![],
                    free: vec![(Slot::Idea, idea)],
                };
                fill.fit(kind, &self.templates.vote_prompt, CHAR_LIMIT)
            })
            .collect()
    }
}

/// Convenience wrapper over [`Composer::compose`].
pub fn compose(
    kind: MessageKind,
    state: &MissionState,
    templates: &Templates,
) -> Result<Vec<OutboundMessage>, ProtocolError> {
    Composer::new(templates.clone()).compose(kind, state)
}

pub fn compose_kickoff(
    spec: &MissionSpec,
    schedule: &Schedule,
    templates: &Templates,
) -> Result<OutboundMessage, ProtocolError> {
    Composer::new(templates.clone()).kickoff(spec, schedule)
}
