use std::cmp::Reverse;

use super::MissionState;
use crate::ids::ParticipantId;

const IDEA_POINTS: u32 = 3;
const DETAIL_POINTS: u32 = 2;
const ENDORSEMENT_POINTS: u32 = 1;

/// Contributors by activity score, highest first; ties go to whoever
/// contributed first. Endorsements count once per distinct idea and never for
/// the participant's own ideas.
pub fn contributor_ranking(state: &MissionState) -> Vec<(ParticipantId, u32)> {
    let mut scored: Vec<_> = state
        .contributors
        .iter()
        .map(|(who, c)| {
            let score = IDEA_POINTS * c.ideas
                + DETAIL_POINTS * c.details
                + ENDORSEMENT_POINTS * c.endorsed.len() as u32;
            (who.clone(), score, c.order)
        })
        .collect();
    scored.sort_by_key(|(_, score, order)| (Reverse(*score), *order));
    scored.into_iter().map(|(who, score, _)| (who, score)).collect()
}
