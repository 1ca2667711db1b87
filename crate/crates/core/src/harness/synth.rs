//! Synthetic conversation trees with class-dependent vocabulary.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{write_dataset, ConversationTree, Label, Tweet};
use crate::error::{Error, Result};
use crate::nn::RngState;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub n_trees_per_class: usize,
    pub n_classes: usize,
    /// Tokens private to each class.
    pub vocab_per_class: usize,
    /// Tokens any class may use.
    pub shared_vocab: usize,
    /// Each tree draws its signal strength (the chance a token comes from the
    /// class vocabulary) uniformly from this range.
    pub signal_min: f64,
    pub signal_max: f64,
    pub tokens_per_tweet: usize,
    /// Chance a reply attaches to a random earlier tweet instead of the
    /// latest one.
    pub branching_prob: f64,
    pub depth_cap: usize,
    pub min_tweets: usize,
    pub max_tweets: usize,
    /// Chance the observed label is swapped for a different class.
    pub label_noise: f64,
    pub n_events: usize,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_trees_per_class: 100,
            n_classes: 2,
            vocab_per_class: 20,
            shared_vocab: 50,
            signal_min: 1.0,
            signal_max: 1.0,
            tokens_per_tweet: 6,
            branching_prob: 0.4,
            depth_cap: 6,
            min_tweets: 1,
            max_tweets: 8,
            label_noise: 0.0,
            n_events: 1,
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if !(2..=4).contains(&self.n_classes) {
            return Err(Error::config("n_classes must be between 2 and 4"));
        }
        if !(0.0..0.5).contains(&self.label_noise) {
            return Err(Error::config("label_noise must lie in [0, 0.5)"));
        }
        if !(0.0 <= self.signal_min && self.signal_min <= self.signal_max && self.signal_max <= 1.0) {
            return Err(Error::config("need 0 <= signal_min <= signal_max <= 1"));
        }
        if self.vocab_per_class == 0 || self.tokens_per_tweet == 0 {
            return Err(Error::config("vocab_per_class and tokens_per_tweet must be positive"));
        }
        if self.shared_vocab == 0 && self.signal_min < 1.0 {
            return Err(Error::config("signal below 1 needs a shared vocabulary"));
        }
        if self.min_tweets == 0 || self.min_tweets > self.max_tweets {
            return Err(Error::config("need 1 <= min_tweets <= max_tweets"));
        }
        if !(0.0..=1.0).contains(&self.branching_prob) || self.depth_cap == 0 || self.n_events == 0 {
            return Err(Error::config("invalid tree-shape settings"));
        }
        Ok(())
    }
}

/// A generated tree plus the class its text was drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticTree {
    pub tree: ConversationTree,
    pub true_class: usize,
    pub signal: f64,
}

/// Trees are interleaved by class and named `t00000`, `t00001`, ...
pub fn generate(spec: &SyntheticSpec) -> Result<Vec<SyntheticTree>> {
    spec.validate()?;
    let base = RngState::new(spec.seed);
    (0..spec.n_trees_per_class * spec.n_classes)
        .map(|i| {
            let mut rng = base.fork(i as u64);
            let class = i % spec.n_classes;
            let signal = rng.uniform_range(spec.signal_min, spec.signal_max);
            let n = spec.min_tweets + rng.below(spec.max_tweets - spec.min_tweets + 1);
            let mut depth: Vec<usize> = Vec::with_capacity(n);
            let mut tweets = Vec::with_capacity(n);
            for j in 0..n {
                let text = (0..spec.tokens_per_tweet)
                    .map(|_| {
                        if rng.uniform() < signal {
                            format!("c{class}w{}", rng.below(spec.vocab_per_class))
                        } else {
                            format!("s{}", rng.below(spec.shared_vocab))
                        }
                    })
                    .collect::<Vec<_>>()
                    .join(" ");
                let parent = if j == 0 {
                    None
                } else {
                    let open: Vec<usize> = (0..j).filter(|&k| depth[k] + 1 < spec.depth_cap).collect();
                    let latest = *open.last().unwrap_or(&0);
                    Some(if rng.uniform() < spec.branching_prob && !open.is_empty() {
                        open[rng.below(open.len())]
                    } else {
                        latest
                    })
                };
                depth.push(parent.map_or(0, |p: usize| depth[p] + 1));
                tweets.push(Tweet::new(format!("w{j}"), parent.map(|p| format!("w{p}")).as_deref(), j as i64 * 1000, text));
            }
            let mut observed = class;
            if rng.uniform() < spec.label_noise {
                observed = (class + 1 + rng.below(spec.n_classes - 1)) % spec.n_classes;
            }
            let label = Label::from_index(observed).expect("at most four classes");
            let tree = ConversationTree::new(format!("t{i:05}"), format!("event{}", i % spec.n_events), label, tweets)?;
            Ok(SyntheticTree { tree, true_class: class, signal })
        })
        .collect()
}

pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<ConversationTree>> {
    Ok(generate(spec)?.into_iter().map(|s| s.tree).collect())
}

/// Writes the generated dataset as JSONL.
pub fn write_synthetic(spec: &SyntheticSpec, path: impl AsRef<Path>) -> Result<usize> {
    let trees = generate_synthetic(spec)?;
    let file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_dataset(&trees, file)?;
    Ok(trees.len())
}
