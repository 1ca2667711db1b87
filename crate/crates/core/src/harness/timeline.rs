//! Uncertainty tracked as a conversation unfolds.

use serde::{Deserialize, Serialize};

use crate::data::{timeline_prefixes, ConversationTree, Embedder, Stance};
use crate::error::{Error, Result};
use crate::rejection::Measure;
use crate::uncertainty::{bundle, UncertaintyBundle, UncertaintyConfig};
use crate::verifier::{encode_tree, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineStep {
    pub n_tweets: usize,
    pub added_tweet: String,
    pub stance: Option<Stance>,
    pub bundle: UncertaintyBundle,
}

impl TimelineStep {
    pub fn predicted(&self) -> usize {
        self.bundle.predicted_class
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimelineSeries {
    pub tree_id: String,
    pub label: usize,
    pub steps: Vec<TimelineStep>,
    /// Replies that were reordered after a parent with a later timestamp.
    pub n_repairs: usize,
}

impl TimelineSeries {
    /// Steps where the prediction differs from the previous step.
    pub fn transitions(&self) -> Vec<usize> {
        self.steps.windows(2).enumerate().filter(|(_, w)| w[0].predicted() != w[1].predicted()).map(|(i, _)| i + 1).collect()
    }

    /// `tree_id,step,n_tweets,added_tweet,stance,pred,vr,entropy,variance,
    /// aleatoric,lcs,margin,ratio,softmax_entropy` per step.
    pub fn to_csv(&self, with_header: bool) -> String {
        let mut s = String::new();
        if with_header {
            s.push_str(
                "tree_id,step,n_tweets,added_tweet,stance,pred,vr,entropy,variance,aleatoric,lcs,margin,ratio,softmax_entropy\n",
            );
        }
        for (i, st) in self.steps.iter().enumerate() {
            let b = &st.bundle;
            let stance = st.stance.map_or_else(String::new, |x| {
                serde_json::to_value(x).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default()
            });
            s.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                self.tree_id,
                i + 1,
                st.n_tweets,
                st.added_tweet,
                stance,
                b.predicted_class,
                b.variation_ratio,
                b.entropy,
                b.variance,
                b.aleatoric,
                b.softmax_lcs,
                b.softmax_margin,
                b.softmax_ratio,
                b.softmax_entropy
            ));
        }
        s
    }
}

/// One bundle per timeline prefix, all drawn from the tree's own random
/// stream so the last step reproduces the whole-tree bundle.
pub fn timeline_report(
    params: &ModelParams,
    tree: &ConversationTree,
    embedder: &Embedder,
    max_branch_len: Option<usize>,
    config: &UncertaintyConfig,
) -> Result<TimelineSeries> {
    let timeline = timeline_prefixes(tree);
    let rng = config.tree_rng(&tree.tree_id);
    let steps = timeline
        .prefixes
        .iter()
        .map(|prefix| {
            let added = prefix.tweets.last().expect("prefixes are nonempty");
            Ok(TimelineStep {
                n_tweets: prefix.len(),
                added_tweet: added.id.clone(),
                stance: added.stance,
                bundle: bundle(params, &encode_tree(prefix, embedder, max_branch_len), config, &rng)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TimelineSeries { tree_id: tree.tree_id.clone(), label: tree.label.index(), steps, n_repairs: timeline.repairs.len() })
}

/// Index of the step with the lowest uncertainty; ties go to the latest.
pub fn min_uncertainty_step(series: &TimelineSeries, measure: Measure) -> Result<usize> {
    if series.steps.is_empty() {
        return Err(Error::InvalidInput(format!("timeline for {} is empty", series.tree_id)));
    }
    let mut best = 0;
    for (i, st) in series.steps.iter().enumerate() {
        if measure.uncertainty(&st.bundle) <= measure.uncertainty(&series.steps[best].bundle) {
            best = i;
        }
    }
    Ok(best)
}

pub fn min_uncertainty_prediction(series: &TimelineSeries, measure: Measure) -> Result<usize> {
    Ok(series.steps[min_uncertainty_step(series, measure)?].predicted())
}
