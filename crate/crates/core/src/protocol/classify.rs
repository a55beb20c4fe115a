use serde::{Deserialize, Serialize};

use super::canonical::{canonicalize, contains_token};
use super::{MessageKind, ProtocolError};
use crate::ids::{IdeaId, ParticipantId, PostId};
use crate::mission::{MissionState, PostRef};
use crate::time::Timestamp;

/// A text post observed on the feed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InboundPost {
    pub post_id: PostId,
    pub author: ParticipantId,
    pub text: String,
    pub at: Timestamp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repost_of: Option<PostId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reply_to: Option<PostId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "class", rename_all = "snake_case")]
pub enum Classified {
    IdeaSubmission {
        canonical_key: String,
        display_text: String,
    },
    VoteByRepost {
        target_idea: IdeaId,
    },
    Detail {
        text: String,
    },
    Chatter,
}

/// Decides what a routed post means for the mission, from structure first:
///
/// 1. a repost of an idea-bearing post votes for that idea, unless its text
///    reduces to a key no idea has yet (a modified repost that is really a
///    new idea);
/// 2. during ideation or voting, any post with content is an idea
///    submission (merging happens downstream);
/// 3. during planning, a reply to the selection announcement is a detail;
/// 4. everything else is chatter, including reposts of system messages.
pub fn classify(post: &InboundPost, state: &MissionState) -> Result<Classified, ProtocolError> {
    let hashtag = state.spec.hashtag.as_str();
    let known = |p: &Option<PostId>| p.as_ref().and_then(|id| state.posts.get(id).copied());
    let repost_target = known(&post.repost_of);
    let reply_target = known(&post.reply_to);
    if !contains_token(&post.text, hashtag) && repost_target.is_none() && reply_target.is_none() {
        return Err(ProtocolError::UnroutablePost(post.post_id.clone()));
    }

    let key = canonicalize(&post.text, hashtag, &state.bot_handle);
    let submission = || Classified::IdeaSubmission {
        canonical_key: key.clone(),
        display_text: post.text.trim().to_string(),
    };

    match repost_target {
        Some(PostRef::Idea(target)) => {
            let introduces_new_key = !key.is_empty() && state.idea_by_key(&key).is_none();
            return Ok(if introduces_new_key {
                submission()
            } else {
                Classified::VoteByRepost {
                    target_idea: target,
                }
            });
        }
        Some(PostRef::Message(_) | PostRef::Detail) => return Ok(Classified::Chatter),
        None => {}
    }

    if state.phase.accepts_contributions() && !key.is_empty() {
        return Ok(submission());
    }

    let replies_to_selection = post.reply_to.is_some()
        && post.reply_to.as_ref() == state.message_post(MessageKind::SelectionAnnouncement);
    if state.phase.accepts_details() && replies_to_selection {
        let text = post.text.trim();
        if !text.is_empty() {
            return Ok(Classified::Detail {
                text: text.to_string(),
            });
        }
    }
    Ok(Classified::Chatter)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ids::MissionId;
    use crate::mission::{create_mission, due_transitions, submit_idea, EventBody, Hashtag, MissionSpec, Timing};
    use chrono::{TimeDelta, TimeZone, Utc};

    fn t0() -> Timestamp {
        Utc.with_ymd_and_hms(2026, 5, 2, 9, 0, 0).unwrap()
    }

    fn park_with_idea() -> MissionState {
        let spec = MissionSpec {
            name: "Park cleanup".into(),
            rationale: "litter".into(),
            hashtag: Hashtag::parse("#parkday").unwrap(),
            selection_deadline: t0() + TimeDelta::hours(24),
            execution_time: t0() + TimeDelta::hours(48),
            creator: "ana".into(),
        };
        let (mut s, _) =
            create_mission(MissionId::sequential(1), spec, t0(), &Timing::default(), "@wedo").unwrap();
        let ev = submit_idea(
            &s,
            &"bo".into(),
            "Pick up litter by the pond! #parkday",
            t0(),
            Some("p1".into()),
        )
        .unwrap();
        for e in ev {
            s.apply(&e).unwrap();
        }
        s
    }

    fn post(id: &str, text: &str) -> InboundPost {
        InboundPost {
            post_id: id.into(),
            author: "cy".into(),
            text: text.into(),
            at: t0(),
            repost_of: None,
            reply_to: None,
        }
    }

    #[test]
    fn plain_repost_votes() {
        let s = park_with_idea();
        let mut p = post("p2", "RT @bo: Pick up litter by the pond! #parkday");
        p.repost_of = Some("p1".into());
        assert_eq!(
            classify(&p, &s).unwrap(),
            Classified::VoteByRepost {
                target_idea: IdeaId::new(1)
            }
        );
    }

    #[test]
    fn modified_repost_with_same_key_votes() {
        let s = park_with_idea();
        let mut p = post("p2", "RT @wedo: Pick up litter by the pond!");
        p.repost_of = Some("p1".into());
        assert_eq!(
            classify(&p, &s).unwrap(),
            Classified::VoteByRepost {
                target_idea: IdeaId::new(1)
            }
        );
    }

    #[test]
    fn modified_repost_with_new_key_is_an_idea() {
        let s = park_with_idea();
        let mut p = post("p2", "RT @bo: plant tulips instead #parkday");
        p.repost_of = Some("p1".into());
        assert!(matches!(
            classify(&p, &s).unwrap(),
            Classified::IdeaSubmission { canonical_key, .. } if canonical_key == "plant tulips instead"
        ));
    }

    #[test]
    fn reply_to_selection_is_detail() {
        let mut s = park_with_idea();
        for e in due_transitions(&s, t0() + TimeDelta::hours(25)) {
            s.apply(&e).unwrap();
        }
        let posted = crate::mission::Event {
            seq: s.last_seq + 1,
            mission_id: s.mission_id.clone(),
            at: s.last_at,
            body: EventBody::MessagePosted {
                message: MessageKind::SelectionAnnouncement,
                dedup_token: "m000001/selection/0".into(),
                post_id: "sim-9".into(),
                text: "plan: ...".into(),
            },
            provenance: None,
        };
        s.apply(&posted).unwrap();
        let mut p = post("p3", "meet at the north gate, 10am");
        p.reply_to = Some("sim-9".into());
        assert_eq!(
            classify(&p, &s).unwrap(),
            Classified::Detail {
                text: "meet at the north gate, 10am".into()
            }
        );
        // same text with only the hashtag during planning is chatter
        assert_eq!(
            classify(&post("p4", "great idea #parkday"), &s).unwrap(),
            Classified::Chatter
        );
    }

    #[test]
    fn unroutable_and_empty() {
        let s = park_with_idea();
        assert_eq!(
            classify(&post("p9", "nothing to see"), &s),
            Err(ProtocolError::UnroutablePost("p9".into()))
        );
        assert_eq!(classify(&post("p9", "#parkday @wedo"), &s).unwrap(), Classified::Chatter);
    }
}
