//! Seeded generators for randomized legal logs, text variants and specs.

use std::collections::{BTreeMap, BTreeSet};

use chrono::TimeDelta;
use rand::seq::SliceRandom;
use rand::Rng;
use wedo_core::ids::{IdeaId, MissionId, ParticipantId, PostId};
use wedo_core::mission::{
    self, create_mission, due_transitions, Event, EventBody, Hashtag, MissionSpec, MissionState,
    Phase, Timing, VoteKind,
};
use wedo_core::protocol::MessageKind;

use super::t0;

const PEOPLE: [&str; 8] = ["ana", "bo", "cy", "dee", "eve", "fay", "gus", "hal"];
const PHRASES: [&str; 6] = [
    "pick up litter",
    "plant flowers",
    "paint the benches",
    "fix the fence",
    "build a birdhouse",
    "clean the pond",
];

pub fn person<R: Rng>(rng: &mut R) -> ParticipantId {
    ParticipantId::new(PEOPLE.choose(rng).unwrap())
}

fn apply_all(state: &mut MissionState, log: &mut Vec<Event>, events: Vec<Event>) {
    for e in events {
        state.apply(&e).expect("generated event is legal");
        log.push(e);
    }
}

/// A random legal log of at most `max_events` events, and the state folded
/// live while generating it.
pub fn random_log<R: Rng>(rng: &mut R, max_events: usize) -> (Vec<Event>, MissionState) {
    let selection = TimeDelta::minutes(rng.gen_range(30..48 * 60));
    let execution = selection + TimeDelta::minutes(rng.gen_range(1..48 * 60));
    let spec = MissionSpec {
        name: "Random mission".into(),
        rationale: String::new(),
        hashtag: Hashtag::parse("#rnd").unwrap(),
        selection_deadline: t0() + selection,
        execution_time: t0() + execution,
        creator: person(rng),
    };
    let (mut state, genesis) = create_mission(
        MissionId::sequential(rng.gen_range(1..1000)),
        spec,
        t0(),
        &Timing::default(),
        "@wedo",
    )
    .unwrap();
    let mut log = vec![genesis];
    let target = rng.gen_range(1..=max_events);
    let mut now = t0();
    let mut posts = 0u32;
    while log.len() < target && !state.phase.is_terminal() {
        let who = person(rng);
        let produced = match rng.gen_range(0..100) {
            0..=24 => {
                let text = format!(
                    "{}{} #rnd",
                    if rng.gen_bool(0.3) { "RT @x: " } else { "" },
                    PHRASES.choose(rng).unwrap()
                );
                let text = if rng.gen_bool(0.5) { text.to_uppercase() } else { text };
                let source = rng.gen_bool(0.5).then(|| {
                    posts += 1;
                    PostId::new(format!("in-{posts}"))
                });
                mission::submit_idea(&state, &who, &text, now, source)
            }
            25..=54 if !state.ideas.is_empty() => {
                let idea = IdeaId::new(rng.gen_range(1..=state.ideas.len() as u32));
                let kind = *[VoteKind::Repost, VoteKind::Favorite].choose(rng).unwrap();
                mission::cast_vote(&state, &who, idea, kind, now, None)
            }
            55..=64 => mission::add_detail(&state, &who, "bring gloves", now, None),
            65..=69 => {
                let phases: BTreeSet<Phase> = Phase::ALL
                    .into_iter()
                    .filter(|p| !p.is_terminal() && rng.gen_bool(0.5))
                    .collect();
                mission::subscribe(&state, &who, phases, now)
            }
            70..=84 => {
                now += TimeDelta::minutes(rng.gen_range(0..90));
                Ok(due_transitions(&state, now))
            }
            85..=98 => {
                posts += 1;
                let kind = *MessageKind::ALL.choose(rng).unwrap();
                Ok(vec![Event {
                    seq: state.last_seq + 1,
                    mission_id: state.mission_id.clone(),
                    at: now.max(state.last_at),
                    body: EventBody::MessagePosted {
                        message: kind,
                        dedup_token: format!("{}/{}/{posts}", state.mission_id, kind.slug()),
                        post_id: PostId::new(format!("out-{posts}")),
                        text: "system message".into(),
                    },
                    provenance: None,
                }])
            }
            _ => mission::cancel(&state, &who, now),
        };
        if let Ok(events) = produced {
            let room = target - log.len();
            apply_all(&mut state, &mut log, events.into_iter().take(room).collect());
        }
    }
    (log, state)
}

/// Base idea texts, already in canonical form, so the expected key of every
/// variant is the base text itself.
pub fn base_ideas() -> Vec<String> {
    [
        "pick up litter by the pond",
        "plant tulips along the path",
        "paint the old benches",
        "fix the playground fence",
        "build three birdhouses",
        "clean the pond filter",
        "visit the café on main street",
        "strasse fest in the square",
        "read to kids at the library",
        "repair bikes for free",
        "sweep the bus stop",
        "water the community garden",
        "collect food for the shelter",
        "mural on the underpass",
        "remove graffiti near school 42",
        "map the broken streetlights",
        "knit scarves for winter",
        "host a repair café",
        "count birds on sunday",
        "plant 100 trees",
    ]
    .map(String::from)
    .to_vec()
}

fn flip_case<R: Rng>(rng: &mut R, text: &str) -> String {
    let mode = rng.gen_range(0..3);
    text.split(' ')
        .map(|w| match mode {
            0 => w.to_uppercase(),
            1 => {
                let mut c = w.chars();
                c.next()
                    .map(|f| f.to_uppercase().collect::<String>() + c.as_str())
                    .unwrap_or_default()
            }
            _ => w
                .chars()
                .map(|ch| {
                    if rng.gen_bool(0.5) {
                        ch.to_uppercase().collect::<String>()
                    } else {
                        ch.to_string()
                    }
                })
                .collect(),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Rewrites the non-ASCII letters of the two accented bases into equivalent
/// spellings that must fold to the same key.
fn unicode_respell<R: Rng>(rng: &mut R, text: &str) -> String {
    let text = if rng.gen_bool(0.5) {
        text.replace("café", "cafe\u{301}")
    } else {
        text.replace("café", "CAFÉ")
    };
    if rng.gen_bool(0.5) {
        text.replace("strasse", "straße")
    } else {
        text.replace("strasse", "STRASSE")
    }
}

const PUNCT: [&str; 8] = ["!", "?", ".", ",", "...", "!!", ";", " -"];

/// A variant of `base` that differs only in case, punctuation, whitespace,
/// retweet prefixes, markers, mentions and the hashtag.
pub fn variant<R: Rng>(rng: &mut R, base: &str, hashtag: &str) -> String {
    let mut text = unicode_respell(rng, base);
    if rng.gen_bool(0.7) {
        text = flip_case(rng, &text);
    }
    let words: Vec<&str> = text.split(' ').collect();
    let mut out = String::new();
    for (i, w) in words.iter().enumerate() {
        if i > 0 {
            out.push_str(&" ".repeat(rng.gen_range(1..4)));
        }
        if rng.gen_bool(0.15) {
            out.push_str(PUNCT.choose(rng).unwrap());
            out.push(' ');
        }
        out.push_str(w);
        if rng.gen_bool(0.2) {
            out.push_str(PUNCT.choose(rng).unwrap());
        }
    }
    if rng.gen_bool(0.3) {
        out = format!("idea: {out}");
    }
    if rng.gen_bool(0.2) {
        out = format!("@wedo {out}");
    }
    let tag = if rng.gen_bool(0.5) { hashtag.to_uppercase() } else { hashtag.to_string() };
    out = match rng.gen_range(0..3) {
        0 => format!("{out} {tag}"),
        1 => format!("{tag} {out}"),
        _ => format!("{out}\t{tag}  "),
    };
    // a repost prefix only counts at the very start of a post
    if rng.gen_bool(0.4) {
        let handle = PEOPLE.choose(rng).unwrap();
        let sep = if rng.gen_bool(0.5) { ":" } else { "" };
        out = format!("{}@{handle}{sep} {out}", ["RT ", "rt  ", "RT", " RT "].choose(rng).unwrap());
    }
    out
}

const TEXT_POOL: &[&str] = &[
    "a", "b", "z", "Q", " ", " ", " ", "é", "e\u{301}", "\u{301}", "漢", "字", "👍", "👨\u{200d}👩\u{200d}👧",
    "🇺🇸", "ᄀ", "ᅡ", "ß", "İ", "#", "@", ":", "idea:", "vote:", "plan:", "go:", "!", "\"", "…", "0", "9",
    "#tag", "@wedo", "RT @x:", "\n", "ﬁ", "Å", "Ω",
];

pub fn random_text<R: Rng>(rng: &mut R, max_pieces: usize) -> String {
    let n = rng.gen_range(0..=max_pieces);
    (0..n).map(|_| *TEXT_POOL.choose(rng).unwrap()).collect()
}

/// A random spec that passes validation; names are cut to the length limit.
pub fn random_spec<R: Rng>(rng: &mut R) -> MissionSpec {
    loop {
        let name: String = random_text(rng, 70).chars().take(60).collect();
        let body_len = rng.gen_range(1..=30);
        let body: String = (0..body_len)
            .map(|_| *b"abcdefghijklmnopqrstuvwxyz0123456789_".choose(rng).unwrap() as char)
            .collect();
        let selection = TimeDelta::minutes(rng.gen_range(1..60 * 24 * 400));
        let spec = MissionSpec {
            name,
            rationale: random_text(rng, 200),
            hashtag: Hashtag::parse(&format!("#{body}")).unwrap(),
            selection_deadline: t0() + selection,
            execution_time: t0() + selection + TimeDelta::minutes(rng.gen_range(1..60 * 24 * 30)),
            creator: person(rng),
        };
        if let Ok(spec) = spec.validated(t0()) {
            return spec;
        }
    }
}

/// Brute-force tally: distinct endorsers per idea, author included, keyed
/// by idea id, straight from the events.
pub fn oracle_votes(events: &[Event]) -> BTreeMap<IdeaId, usize> {
    let mut endorsers: BTreeMap<IdeaId, BTreeSet<ParticipantId>> = BTreeMap::new();
    for e in events {
        match &e.body {
            EventBody::IdeaSubmitted { idea_id, author, .. } => {
                endorsers.entry(*idea_id).or_default().insert(author.clone());
            }
            EventBody::VoteCast { idea_id, voter, .. } => {
                endorsers.entry(*idea_id).or_default().insert(voter.clone());
            }
            _ => {}
        }
    }
    endorsers.into_iter().map(|(k, v)| (k, v.len())).collect()
}

/// One contribution in a ballot. Ideas are indexed by their position in
/// `Ballot::ideas`.
#[derive(Debug, Clone)]
pub enum Action {
    Idea { idea: usize },
    Vote { voter: ParticipantId, idea: usize, kind: VoteKind },
    Resubmit { voter: ParticipantId, idea: usize, text: String },
}

#[derive(Debug, Clone)]
pub struct Ballot {
    /// `(author, text)` in submission order.
    pub ideas: Vec<(ParticipantId, String)>,
    pub actions: Vec<Action>,
}

const VOTERS: usize = 12;

pub fn random_ballot<R: Rng>(rng: &mut R) -> Ballot {
    let mut bases = base_ideas();
    bases.shuffle(rng);
    let n = rng.gen_range(1..=8);
    let voter = |i: usize| ParticipantId::new(format!("v{i}"));
    let ideas: Vec<_> = bases[..n]
        .iter()
        .map(|b| (voter(rng.gen_range(0..VOTERS)), variant(rng, b, "#rnd")))
        .collect();
    let mut actions: Vec<Action> = (0..n).map(|idea| Action::Idea { idea }).collect();
    for _ in 0..rng.gen_range(0..40) {
        let idea = rng.gen_range(0..n);
        let who = voter(rng.gen_range(0..VOTERS));
        actions.push(if rng.gen_bool(0.2) {
            Action::Resubmit { voter: who, idea, text: variant(rng, &bases[idea], "#rnd") }
        } else {
            let kind = *[VoteKind::Repost, VoteKind::Favorite].choose(rng).unwrap();
            Action::Vote { voter: who, idea, kind }
        });
    }
    Ballot { ideas, actions }
}

impl Ballot {
    /// A random order of the actions that keeps ideas in submission order and
    /// every endorsement after the idea it endorses.
    pub fn shuffled<R: Rng>(&self, rng: &mut R) -> Vec<Action> {
        let mut ideas = self.actions.iter().filter(|a| matches!(a, Action::Idea { .. }));
        let mut waiting: Vec<&Action> = self
            .actions
            .iter()
            .filter(|a| !matches!(a, Action::Idea { .. }))
            .collect();
        let mut next_idea = ideas.next();
        let mut emitted = 0usize;
        let mut out = Vec::with_capacity(self.actions.len());
        loop {
            let ready: Vec<usize> = waiting
                .iter()
                .enumerate()
                .filter(|(_, a)| match a {
                    Action::Vote { idea, .. } | Action::Resubmit { idea, .. } => *idea < emitted,
                    Action::Idea { .. } => false,
                })
                .map(|(i, _)| i)
                .collect();
            let pick_idea = next_idea.is_some() && (ready.is_empty() || rng.gen_bool(0.3));
            if pick_idea {
                out.push(next_idea.unwrap().clone());
                next_idea = ideas.next();
                emitted += 1;
            } else if let Some(&i) = ready.choose(rng) {
                out.push(waiting.swap_remove(i).clone());
            } else {
                return out;
            }
        }
    }

    /// Folds `actions` through the commands, one second apart, then runs the
    /// selection.
    pub fn play(&self, actions: &[Action]) -> (Vec<Event>, MissionState) {
        let spec = MissionSpec {
            name: "Ballot".into(),
            rationale: String::new(),
            hashtag: Hashtag::parse("#rnd").unwrap(),
            selection_deadline: t0() + TimeDelta::hours(24),
            execution_time: t0() + TimeDelta::hours(48),
            creator: "ana".into(),
        };
        let (mut state, genesis) =
            create_mission(MissionId::sequential(1), spec, t0(), &Timing::default(), "@wedo").unwrap();
        let mut log = vec![genesis];
        let mut ids = Vec::new();
        for (i, action) in actions.iter().enumerate() {
            let now = t0() + TimeDelta::seconds(i as i64 + 1);
            let events = match action {
                Action::Idea { idea } => {
                    let (author, text) = &self.ideas[*idea];
                    let events = mission::submit_idea(&state, author, text, now, None).unwrap();
                    ids.push(state.next_idea_id());
                    events
                }
                Action::Vote { voter, idea, kind } => {
                    mission::cast_vote(&state, voter, ids[*idea], *kind, now, None).unwrap()
                }
                Action::Resubmit { voter, text, .. } => {
                    mission::submit_idea(&state, voter, text, now, None).unwrap()
                }
            };
            apply_all(&mut state, &mut log, events);
        }
        let events = due_transitions(&state, t0() + TimeDelta::hours(24));
        apply_all(&mut state, &mut log, events);
        (log, state)
    }
}

/// Walks a mission built from `spec` plus a few random idea posts through
/// every remaining phase and composes each announcement along the way.
/// Returns `(kind, text)` pairs; a kind that cannot be composed is an error.
pub fn compose_lifecycle<R: Rng>(
    rng: &mut R,
    spec: MissionSpec,
) -> Result<Vec<(MessageKind, String)>, wedo_core::protocol::ProtocolError> {
    let composer = wedo_core::protocol::Composer::default();
    let (mut state, _) =
        create_mission(MissionId::sequential(1), spec, t0(), &Timing::default(), "@wedo").unwrap();
    for i in 0..rng.gen_range(0..6) {
        let text = random_text(rng, 120);
        let now = t0() + TimeDelta::seconds(i);
        if let Ok(events) = mission::submit_idea(&state, &person(rng), &text, now, None) {
            for e in events {
                state.apply(&e).unwrap();
            }
        }
    }
    let mut out = Vec::new();
    let mut kinds = vec![MessageKind::Kickoff];
    for (at, _) in mission::remaining_triggers(&state) {
        for e in due_transitions(&state, at) {
            state.apply(&e).unwrap();
        }
        match state.phase {
            Phase::Voting => kinds.push(MessageKind::VotePrompt),
            Phase::Planning => kinds.push(MessageKind::SelectionAnnouncement),
            Phase::ActionPending => kinds.push(MessageKind::ActionReminder),
            _ => {}
        }
        for kind in kinds.drain(..) {
            for msg in composer.compose(kind, &state)? {
                out.push((kind, msg.text));
            }
        }
    }
    Ok(out)
}
