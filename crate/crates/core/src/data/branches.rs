use std::collections::HashMap;

use super::tree::{ConversationTree, Tweet};

/// A root-to-leaf path through a conversation tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Branch {
    pub tree_id: String,
    pub tweets: Vec<Tweet>,
}

impl Branch {
    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn leaf(&self) -> &Tweet {
        self.tweets.last().expect("branch is non-empty")
    }

    pub fn ids(&self) -> Vec<&str> {
        self.tweets.iter().map(|t| t.id.as_str()).collect()
    }
}

/// One branch per leaf, ordered by leaf timestamp then leaf id.
pub fn decompose_branches(tree: &ConversationTree) -> Vec<Branch> {
    decompose_branches_capped(tree, None)
}

/// Like [`decompose_branches`], but a branch longer than `max_len` keeps its
/// earliest `max_len - 1` tweets plus the leaf.
pub fn decompose_branches_capped(tree: &ConversationTree, max_len: Option<usize>) -> Vec<Branch> {
    let by_id: HashMap<&str, &Tweet> = tree.tweets.iter().map(|t| (t.id.as_str(), t)).collect();
    let mut leaves = tree.leaves();
    leaves.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.id.cmp(&b.id)));
    leaves
        .into_iter()
        .map(|leaf| {
            let mut path = vec![leaf.clone()];
            let mut cur = leaf;
            while let Some(p) = &cur.parent_id {
                cur = by_id[p.as_str()];
                path.push(cur.clone());
            }
            path.reverse();
            if let Some(cap) = max_len {
                let cap = cap.max(1);
                if path.len() > cap {
                    let leaf = path.pop().expect("non-empty");
                    path.truncate(cap - 1);
                    path.push(leaf);
                }
            }
            Branch { tree_id: tree.tree_id.clone(), tweets: path }
        })
        .collect()
}
