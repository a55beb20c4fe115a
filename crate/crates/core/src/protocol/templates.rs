use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use super::canonical::count_markers;
use super::{MessageKind, MARKERS};

const DEFAULT_TEMPLATES: &str = include_str!("templates.txt");

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TemplateError {
    #[error("line {line}: expected `kind = template`")]
    Syntax { line: usize },
    #[error("unknown template kind {0:?}")]
    UnknownKind(String),
    #[error("template {0:?} is missing")]
    Missing(&'static str),
    #[error("template {key:?}: {reason}")]
    Invalid { key: String, reason: String },
    #[error("cannot read template file: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub(crate) enum Slot {
    Name,
    Rationale,
    Hashtag,
    Deadline,
    Idea,
    When,
}

impl Slot {
    fn parse(name: &str) -> Option<Slot> {
        Some(match name {
            "name" => Slot::Name,
            "rationale" => Slot::Rationale,
            "hashtag" => Slot::Hashtag,
            "deadline" => Slot::Deadline,
            "idea" => Slot::Idea,
            "when" => Slot::When,
            _ => return None,
        })
    }

    /// User-supplied text that must be sanitized and may be truncated.
    pub(crate) fn is_free_text(self) -> bool {
        matches!(self, Slot::Name | Slot::Rationale | Slot::Idea)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Segment {
    Lit(String),
    Slot(Slot),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Template {
    pub(crate) segments: Vec<Segment>,
}

impl Template {
    fn parse(key: &str, text: &str) -> Result<Self, TemplateError> {
        let invalid = |reason: String| TemplateError::Invalid {
            key: key.to_string(),
            reason,
        };
        let mut segments = Vec::new();
        let mut rest = text;
        while let Some(open) = rest.find('{') {
            if open > 0 {
                segments.push(Segment::Lit(rest[..open].to_string()));
            }
            let close = rest[open..]
                .find('}')
                .ok_or_else(|| invalid("unclosed placeholder".into()))?
                + open;
            let name = &rest[open + 1..close];
            let slot =
                Slot::parse(name).ok_or_else(|| invalid(format!("unknown placeholder {{{name}}}")))?;
            segments.push(Segment::Slot(slot));
            rest = &rest[close + 1..];
        }
        if !rest.is_empty() {
            segments.push(Segment::Lit(rest.to_string()));
        }
        Ok(Self { segments })
    }

    fn literal_text(&self) -> String {
        self.segments
            .iter()
            .map(|s| match s {
                Segment::Lit(l) => l.as_str(),
                Segment::Slot(_) => " ",
            })
            .collect()
    }

    pub(crate) fn slots(&self) -> impl Iterator<Item = Slot> + '_ {
        self.segments.iter().filter_map(|s| match s {
            Segment::Slot(slot) => Some(*slot),
            Segment::Lit(_) => None,
        })
    }

    /// Rejects templates that break the outbound invariants on their own, or
    /// where free text could fuse with adjacent literal characters into a
    /// hashtag or marker token.
    fn validate(&self, key: &str, kind: MessageKind) -> Result<(), String> {
        let hashtags = self.slots().filter(|s| *s == Slot::Hashtag).count();
        if hashtags != 1 {
            return Err(format!("must contain {{hashtag}} exactly once, found {hashtags}"));
        }
        let lits = self.literal_text();
        for marker in MARKERS {
            let n = count_markers(&lits, marker);
            let want = usize::from(marker == kind.marker());
            if n != want {
                return Err(format!("marker {marker:?} appears {n} times, expected {want}"));
            }
        }
        let needs_idea = matches!(key, "vote_prompt" | "selection" | "reminder");
        if needs_idea && !self.slots().any(|s| s == Slot::Idea) {
            return Err("must contain {idea}".into());
        }
        for (i, seg) in self.segments.iter().enumerate() {
            let Segment::Slot(slot) = seg else { continue };
            let before = i
                .checked_sub(1)
                .and_then(|j| match &self.segments[j] {
                    Segment::Lit(l) => l.chars().last(),
                    Segment::Slot(_) => Some('x'),
                });
            let after = match self.segments.get(i + 1) {
                Some(Segment::Lit(l)) => l.chars().next(),
                Some(Segment::Slot(_)) => Some('x'),
                None => None,
            };
            let joins_word = |c: Option<char>| c.is_some_and(|c| c.is_alphanumeric() || c == '_');
            if joins_word(after) || after == Some(':') {
                return Err(format!("{slot:?} must not be followed by a word character or ':'"));
            }
            if slot.is_free_text() && (joins_word(before) || matches!(before, Some('#' | '@'))) {
                return Err(format!("{slot:?} must not follow a word character, '#' or '@'"));
            }
        }
        Ok(())
    }
}

/// The full template set, keyed by kind.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Templates {
    pub(crate) kickoff: Template,
    pub(crate) vote_prompt: Template,
    pub(crate) vote_prompt_empty: Template,
    pub(crate) selection: Template,
    pub(crate) reminder: Template,
}

impl Default for Templates {
    fn default() -> Self {
        Self::parse(DEFAULT_TEMPLATES).expect("built-in templates are valid")
    }
}

impl Templates {
    pub fn parse(text: &str) -> Result<Self, TemplateError> {
        let mut map = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or(TemplateError::Syntax { line: i + 1 })?;
            let key = key.trim();
            let kind = match key {
                "kickoff" => MessageKind::Kickoff,
                "vote_prompt" | "vote_prompt_empty" => MessageKind::VotePrompt,
                "selection" => MessageKind::SelectionAnnouncement,
                "reminder" => MessageKind::ActionReminder,
                other => return Err(TemplateError::UnknownKind(other.to_string())),
            };
            let template = Template::parse(key, value.trim())?;
            template
                .validate(key, kind)
                .map_err(|reason| TemplateError::Invalid {
                    key: key.to_string(),
                    reason,
                })?;
            map.insert(key.to_string(), template);
        }
        let mut take = |key: &'static str| map.remove(key).ok_or(TemplateError::Missing(key));
        Ok(Self {
            kickoff: take("kickoff")?,
            vote_prompt: take("vote_prompt")?,
            vote_prompt_empty: take("vote_prompt_empty")?,
            selection: take("selection")?,
            reminder: take("reminder")?,
        })
    }

    pub fn load(path: &Path) -> Result<Self, TemplateError> {
        let text = std::fs::read_to_string(path).map_err(|e| TemplateError::Io(e.to_string()))?;
        Self::parse(&text)
    }
}
