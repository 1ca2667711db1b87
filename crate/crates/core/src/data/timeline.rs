use std::collections::{HashMap, HashSet};

use super::tree::{ConversationTree, Tweet};

/// A reply whose timestamp precedes its parent's; it was moved to directly
/// after the parent.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderRepair {
    pub tweet_id: String,
    pub parent_id: String,
}

#[derive(Debug, Clone)]
pub struct Timeline {
    /// Prefix `j` holds the `j + 1` earliest tweets.
    pub prefixes: Vec<ConversationTree>,
    pub repairs: Vec<OrderRepair>,
}

/// Rebuilds a conversation one tweet at a time in `(timestamp, id)` order.
pub fn timeline_prefixes(tree: &ConversationTree) -> Timeline {
    let mut sorted: Vec<&Tweet> = tree.tweets.iter().collect();
    sorted.sort_by(|a, b| a.timestamp.cmp(&b.timestamp).then_with(|| a.id.cmp(&b.id)));

    let mut placed: HashSet<&str> = HashSet::new();
    let mut waiting: HashMap<&str, Vec<&Tweet>> = HashMap::new();
    let mut order: Vec<&Tweet> = Vec::with_capacity(sorted.len());
    let mut repairs = Vec::new();

    for tweet in sorted {
        match &tweet.parent_id {
            Some(p) if !placed.contains(p.as_str()) => {
                waiting.entry(p.as_str()).or_default().push(tweet);
                continue;
            }
            _ => {}
        }
        // Place the tweet, then anything that was waiting on it (depth first,
        // keeping each waiting list in sorted order).
        let mut stack = vec![tweet];
        while let Some(t) = stack.pop() {
            placed.insert(t.id.as_str());
            order.push(t);
            if let Some(kids) = waiting.remove(t.id.as_str()) {
                for k in kids.iter().rev() {
                    stack.push(k);
                }
            }
        }
    }
    debug_assert_eq!(order.len(), tree.len());

    let positions: HashMap<&str, usize> = order.iter().enumerate().map(|(i, t)| (t.id.as_str(), i)).collect();
    for t in &order {
        if let Some(p) = &t.parent_id {
            let parent = tree.get(p).expect("validated parent");
            if t.timestamp < parent.timestamp || (t.timestamp == parent.timestamp && t.id < parent.id) {
                debug_assert!(positions[p.as_str()] < positions[t.id.as_str()]);
                repairs.push(OrderRepair { tweet_id: t.id.clone(), parent_id: p.clone() });
            }
        }
    }

    let prefixes = (1..=order.len())
        .map(|j| ConversationTree {
            tree_id: tree.tree_id.clone(),
            event: tree.event.clone(),
            label: tree.label,
            tweets: order[..j].iter().map(|&t| t.clone()).collect(),
        })
        .collect();
    Timeline { prefixes, repairs }
}
