//! Partitions of records for boxplots and rank tests.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};
use crate::rejection::{Measure, PredictionRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    ClassLabel,
    /// Equal-count bins over conversation size.
    ConversationSize { bins: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Group {
    pub name: String,
    pub tree_ids: Vec<String>,
    pub values: Vec<f64>,
}

/// Splits `measure` values by gold label (in class order, present labels
/// only) or into size bins ordered by `(n_tweets, tree_id)`. Earlier bins
/// take the remainder when the count does not divide evenly.
pub fn group_uncertainty_by(records: &[PredictionRecord], measure: Measure, key: GroupKey) -> Result<Vec<Group>> {
    let make = |name: String, members: Vec<&PredictionRecord>| Group {
        name,
        tree_ids: members.iter().map(|r| r.tree_id.clone()).collect(),
        values: members.iter().map(|r| measure.raw(&r.bundle)).collect(),
    };
    match key {
        GroupKey::ClassLabel => {
            let mut by: BTreeMap<usize, Vec<&PredictionRecord>> = BTreeMap::new();
            for r in records {
                by.entry(r.label).or_default().push(r);
            }
            Ok(by
                .into_iter()
                .map(|(k, v)| {
                    let name = Label::from_index(k).map_or_else(|| k.to_string(), |l| l.as_str().to_string());
                    make(name, v)
                })
                .collect())
        }
        GroupKey::ConversationSize { bins } => {
            if bins == 0 {
                return Err(Error::config("size grouping needs at least one bin"));
            }
            let mut sorted: Vec<&PredictionRecord> = records.iter().collect();
            sorted.sort_by(|a, b| a.n_tweets.cmp(&b.n_tweets).then_with(|| a.tree_id.cmp(&b.tree_id)));
            let n = sorted.len();
            let (base, extra) = (n / bins, n % bins);
            let mut out = Vec::new();
            let mut start = 0;
            for k in 0..bins {
                let len = base + usize::from(k < extra);
                if len == 0 {
                    continue;
                }
                let members = sorted[start..start + len].to_vec();
                let name = format!("{}-{}", members[0].n_tweets, members[len - 1].n_tweets);
                out.push(make(name, members));
                start += len;
            }
            Ok(out)
        }
    }
}
