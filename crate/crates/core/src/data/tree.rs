use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stance {
    Support,
    Deny,
    Query,
    Comment,
}

/// Veracity label. The discriminant is the class index used by the model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    True = 0,
    False = 1,
    Unverified = 2,
    #[serde(rename = "nonrumour")]
    NonRumour = 3,
}

impl Label {
    pub const ALL: [Label; 4] = [Label::True, Label::False, Label::Unverified, Label::NonRumour];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Label> {
        Self::ALL.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Label::True => "true",
            Label::False => "false",
            Label::Unverified => "unverified",
            Label::NonRumour => "nonrumour",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| Error::data(format!("unknown label {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tweet {
    pub id: String,
    pub parent_id: Option<String>,
    /// Milliseconds since the epoch.
    pub timestamp: i64,
    pub text: String,
    pub stance: Option<Stance>,
}

impl Tweet {
    pub fn new(id: impl Into<String>, parent_id: Option<&str>, timestamp: i64, text: impl Into<String>) -> Self {
        Tweet {
            id: id.into(),
            parent_id: parent_id.map(str::to_owned),
            timestamp,
            text: text.into(),
            stance: None,
        }
    }
}

/// A rumour conversation: one root tweet and its reply tree.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConversationTree {
    pub tree_id: String,
    pub event: String,
    pub label: Label,
    pub tweets: Vec<Tweet>,
}

impl ConversationTree {
    /// Builds a tree after checking that it has exactly one root, unique ids,
    /// resolvable parents and no cycles.
    pub fn new(tree_id: impl Into<String>, event: impl Into<String>, label: Label, tweets: Vec<Tweet>) -> Result<Self> {
        let tree = ConversationTree { tree_id: tree_id.into(), event: event.into(), label, tweets };
        tree.validate()?;
        Ok(tree)
    }

    pub fn validate(&self) -> Result<()> {
        let err = |message: String| Error::Parse { tree_id: self.tree_id.clone(), message };
        if self.tweets.is_empty() {
            return Err(err("tree has no tweets".into()));
        }
        let mut ids = HashSet::new();
        for t in &self.tweets {
            if !ids.insert(t.id.as_str()) {
                return Err(err(format!("duplicate tweet id {}", t.id)));
            }
        }
        let roots: Vec<&str> = self.tweets.iter().filter(|t| t.parent_id.is_none()).map(|t| t.id.as_str()).collect();
        match roots.len() {
            0 => return Err(err("tree has no root tweet".into())),
            1 => {}
            _ => return Err(err(format!("multiple roots: {}", roots.join(", ")))),
        }
        for t in &self.tweets {
            if let Some(p) = &t.parent_id {
                if !ids.contains(p.as_str()) {
                    return Err(err(format!("tweet {} references missing parent {p}", t.id)));
                }
                if p == &t.id {
                    return Err(err(format!("tweet {} is its own parent", t.id)));
                }
            }
        }
        // Every tweet must be reachable from the root, otherwise a cycle exists.
        let children = self.children();
        let mut seen = HashSet::new();
        let mut stack = vec![roots[0]];
        while let Some(id) = stack.pop() {
            seen.insert(id);
            if let Some(kids) = children.get(id) {
                stack.extend(kids.iter().map(|&i| self.tweets[i].id.as_str()));
            }
        }
        if seen.len() != self.tweets.len() {
            let stuck: Vec<&str> =
                self.tweets.iter().map(|t| t.id.as_str()).filter(|id| !seen.contains(id)).collect();
            return Err(err(format!("cycle among tweets {}", stuck.join(", "))));
        }
        Ok(())
    }

    pub fn root(&self) -> &Tweet {
        self.tweets.iter().find(|t| t.parent_id.is_none()).expect("validated tree has a root")
    }

    pub fn len(&self) -> usize {
        self.tweets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tweets.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Tweet> {
        self.tweets.iter().find(|t| t.id == id)
    }

    /// Parent id → indices of its replies, in input order.
    pub fn children(&self) -> HashMap<&str, Vec<usize>> {
        let mut map: HashMap<&str, Vec<usize>> = HashMap::new();
        for (i, t) in self.tweets.iter().enumerate() {
            if let Some(p) = &t.parent_id {
                map.entry(p.as_str()).or_default().push(i);
            }
        }
        map
    }

    pub fn leaves(&self) -> Vec<&Tweet> {
        let children = self.children();
        self.tweets.iter().filter(|t| !children.contains_key(t.id.as_str())).collect()
    }
}

/// Number of classes implied by a set of trees: highest label index + 1, at
/// least 2.
pub fn class_count(trees: &[ConversationTree]) -> usize {
    trees.iter().map(|t| t.label.index() + 1).max().unwrap_or(2).max(2)
}
