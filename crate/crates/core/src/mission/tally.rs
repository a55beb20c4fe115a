use std::cmp::Reverse;

use serde::{Deserialize, Serialize};

use super::MissionState;
use crate::ids::IdeaId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TallyEntry {
    pub idea_id: IdeaId,
    pub votes: usize,
}

/// Vote counts in rank order: votes descending, then first submission, then
/// idea id.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally(Vec<TallyEntry>);

impl Tally {
    pub fn entries(&self) -> &[TallyEntry] {
        &self.0
    }

    pub fn get(&self, id: IdeaId) -> Option<usize> {
        self.0.iter().find(|e| e.idea_id == id).map(|e| e.votes)
    }

    pub fn order(&self) -> Vec<IdeaId> {
        self.0.iter().map(|e| e.idea_id).collect()
    }

    pub fn first(&self) -> Option<IdeaId> {
        self.0.first().map(|e| e.idea_id)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn tally(state: &MissionState) -> Tally {
    let mut ranked: Vec<_> = state.ideas.iter().collect();
    ranked.sort_by_key(|i| (Reverse(i.votes()), i.first_seen, i.idea_id));
    Tally(
        ranked
            .into_iter()
            .map(|i| TallyEntry {
                idea_id: i.idea_id,
                votes: i.votes(),
            })
            .collect(),
    )
}

/// The leading idea, or `None` when the mission has no ideas.
pub fn select_winner(state: &MissionState) -> Option<IdeaId> {
    tally(state).first()
}
