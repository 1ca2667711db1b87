use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::tree::ConversationTree;
use crate::error::{Error, Result};
use crate::nn::RngState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldScheme {
    LeaveOneEventOut,
    KFold,
}

/// Assignment of every tree to one cross-validation fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub scheme: FoldScheme,
    pub assignments: BTreeMap<String, usize>,
    pub dev_fold: Option<usize>,
}

impl FoldSpec {
    pub fn n_folds(&self) -> usize {
        self.assignments.values().max().map_or(0, |m| m + 1)
    }

    pub fn fold_of(&self, tree_id: &str) -> Option<usize> {
        self.assignments.get(tree_id).copied()
    }

    /// Fold ids that are tested in turn (every fold except the dev fold).
    pub fn test_folds(&self) -> Vec<usize> {
        let used: BTreeSet<usize> = self.assignments.values().copied().collect();
        used.into_iter().filter(|f| Some(*f) != self.dev_fold).collect()
    }

    /// Checks that the folds cover exactly the given trees.
    pub fn validate(&self, trees: &[ConversationTree]) -> Result<()> {
        let ids: HashSet<&str> = trees.iter().map(|t| t.tree_id.as_str()).collect();
        if ids.len() != trees.len() {
            return Err(Error::config("dataset contains duplicate tree ids"));
        }
        if let Some(t) = trees.iter().find(|t| !self.assignments.contains_key(&t.tree_id)) {
            return Err(Error::config(format!("tree {} has no fold assignment", t.tree_id)));
        }
        if let Some(id) = self.assignments.keys().find(|k| !ids.contains(k.as_str())) {
            return Err(Error::config(format!("fold file names unknown tree {id}")));
        }
        if let Some(d) = self.dev_fold {
            if !self.assignments.values().any(|&f| f == d) {
                return Err(Error::config(format!("dev fold {d} has no trees")));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Leave-one-event-out gives one fold per event (events in lexicographic
/// order). k-fold shuffles the sorted tree ids with `seed` and deals them
/// round-robin.
pub fn make_folds(trees: &[ConversationTree], scheme: FoldScheme, k: Option<usize>, seed: u64) -> Result<FoldSpec> {
    let assignments = match scheme {
        FoldScheme::LeaveOneEventOut => {
            let events: BTreeSet<&str> = trees.iter().map(|t| t.event.as_str()).collect();
            if events.len() < 2 {
                return Err(Error::config(format!(
                    "leave-one-event-out needs at least 2 events, found {}",
                    events.len()
                )));
            }
            let index: BTreeMap<&str, usize> = events.into_iter().enumerate().map(|(i, e)| (e, i)).collect();
            trees.iter().map(|t| (t.tree_id.clone(), index[t.event.as_str()])).collect()
        }
        FoldScheme::KFold => {
            let k = k.ok_or_else(|| Error::config("k-fold needs k"))?;
            if k < 2 {
                return Err(Error::config(format!("k-fold needs k >= 2, got {k}")));
            }
            let mut ids: Vec<&str> = trees.iter().map(|t| t.tree_id.as_str()).collect();
            ids.sort_unstable();
            ids.shuffle(&mut RngState::new(seed));
            ids.into_iter().enumerate().map(|(i, id)| (id.to_owned(), i % k)).collect()
        }
    };
    Ok(FoldSpec { scheme, assignments, dev_fold: None })
}
