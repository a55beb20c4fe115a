//! Canonical keys: the normal form that lets modified reposts and
//! near-duplicate submissions merge into one idea.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::OnceLock;

use regex::Regex;
use unicode_normalization::UnicodeNormalization;

use super::MARKERS;

fn repost_prefix() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\s*rt\s*@\w+\s*:?").unwrap())
}

fn marker_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let alts: Vec<_> = MARKERS
            .iter()
            .map(|m| regex::escape(m.trim_end_matches(':')))
            .collect();
        Regex::new(&format!(r"(?i)\b(?:{}):", alts.join("|"))).unwrap()
    })
}

/// `#tag` or `@handle` as a whole token, case-insensitive. Compiled patterns
/// are memoized per thread; composition checks the same hashtag many times.
fn token_re(token: &str) -> Option<Regex> {
    const MEMO_LIMIT: usize = 256;
    thread_local! {
        static MEMO: RefCell<HashMap<String, Regex>> = RefCell::new(HashMap::new());
    }
    if token.is_empty() {
        return None;
    }
    MEMO.with_borrow_mut(|memo| {
        if let Some(re) = memo.get(token) {
            return Some(re.clone());
        }
        let re = Regex::new(&format!(r"(?i){}\b", regex::escape(token))).ok()?;
        if memo.len() >= MEMO_LIMIT {
            memo.clear();
        }
        memo.insert(token.to_string(), re.clone());
        Some(re)
    })
}

fn mention(bot_handle: &str) -> String {
    let h = bot_handle.trim();
    if h.is_empty() || h.starts_with('@') {
        h.to_string()
    } else {
        format!("@{h}")
    }
}

fn nfc(s: &str) -> String {
    s.nfc().collect()
}

/// Case-folds until stable; a fold can expose characters NFC recomposes.
fn fold(s: &str) -> String {
    let mut cur = nfc(s);
    loop {
        let next = nfc(&caseless::default_case_fold_str(&cur));
        if next == cur {
            return cur;
        }
        cur = next;
    }
}

/// Produces the merge key for a post's text:
///
/// 1. strip leading `RT @handle:` prefixes (any handle, any case, colon optional);
/// 2. delete the mission hashtag, every phase marker and mentions of the bot;
/// 3. NFC-normalize and apply the default Unicode case fold;
/// 4. replace everything but letters, digits and whitespace with a space;
/// 5. collapse whitespace and trim.
///
/// The result is idempotent. An empty result means the post has no content.
pub fn canonicalize(text: &str, mission_hashtag: &str, bot_handle: &str) -> String {
    let mut rest = text;
    while let Some(m) = repost_prefix().find(rest) {
        rest = &rest[m.end()..];
    }

    let mut stripped = rest.to_string();
    for token in [mission_hashtag.to_string(), mention(bot_handle)] {
        if let Some(re) = token_re(&token) {
            stripped = re.replace_all(&stripped, " ").into_owned();
        }
    }
    stripped = marker_re().replace_all(&stripped, " ").into_owned();

    let folded = fold(&stripped);
    let spaced: String = folded
        .chars()
        .map(|c| {
            if c.is_alphanumeric() {
                c
            } else {
                ' '
            }
        })
        .collect();
    spaced.split_whitespace().collect::<Vec<_>>().join(" ")
}

/// True when `text` contains `token` (a hashtag or mention) as a whole token.
pub fn contains_token(text: &str, token: &str) -> bool {
    token_re(token).is_some_and(|re| re.is_match(text))
}

pub fn count_hashtag(text: &str, hashtag: &str) -> usize {
    token_re(hashtag).map_or(0, |re| re.find_iter(text).count())
}

/// Occurrences of one phase marker as a token (`go:` inside `Chicago:` does
/// not count).
pub fn count_markers(text: &str, marker: &str) -> usize {
    static RES: OnceLock<Vec<Regex>> = OnceLock::new();
    let build = |m: &str| {
        let word = regex::escape(m.trim_end_matches(':'));
        Regex::new(&format!(r"(?i)\b{word}:")).expect("marker pattern")
    };
    let known = RES.get_or_init(|| MARKERS.iter().map(|m| build(m)).collect());
    match MARKERS.iter().position(|m| *m == marker) {
        Some(i) => known[i].find_iter(text).count(),
        None => build(marker).find_iter(text).count(),
    }
}

pub(crate) fn strip_markers(text: &str) -> String {
    marker_re().replace_all(text, " ").into_owned()
}

pub(crate) fn strip_token(text: &str, token: &str) -> String {
    match token_re(token) {
        Some(re) => re.replace_all(text, " ").into_owned(),
        None => text.to_string(),
    }
}

/// Length in code points after NFC normalization.
pub fn nfc_len(text: &str) -> usize {
    text.nfc().count()
}
