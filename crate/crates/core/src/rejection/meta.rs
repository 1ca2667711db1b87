//! Meta-classifiers that predict whether the verifier's answer is correct
//! from its uncertainty features.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::records::PredictionRecord;
use crate::error::{Error, Result};
use crate::nn::{sigmoid, RngState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetaBackend {
    LinearHinge,
    RandomForest,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetaHyperparams {
    pub l2: f64,
    pub epochs: usize,
    pub learning_rate: f64,
    pub n_trees: usize,
    pub max_depth: usize,
    pub bootstrap_fraction: f64,
    pub min_samples_split: usize,
    /// Score at or above which a record is predicted correct.
    pub threshold: f64,
}

impl Default for MetaHyperparams {
    fn default() -> Self {
        MetaHyperparams {
            l2: 1e-3,
            epochs: 200,
            learning_rate: 0.05,
            n_trees: 100,
            max_depth: 8,
            bootstrap_fraction: 1.0,
            min_samples_split: 2,
            threshold: 0.5,
        }
    }
}

/// Feature vector: `[aleatoric, variance, entropy, variation_ratio,
/// p_0..p_{C-1}, one-hot predicted class]`.
pub fn meta_features(r: &PredictionRecord) -> Vec<f64> {
    let b = &r.bundle;
    let c = b.mean_probs.len();
    let mut f = Vec::with_capacity(4 + 2 * c);
    f.extend([b.aleatoric, b.variance, b.entropy, b.variation_ratio]);
    f.extend(&b.mean_probs);
    f.extend((0..c).map(|k| if k == r.predicted { 1.0 } else { 0.0 }));
    f
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MetaState {
    /// Dev labels were all of one class.
    Constant { correct: bool },
    Linear { weights: Vec<f64>, bias: f64, mean: Vec<f64>, std: Vec<f64> },
    Forest { trees: Vec<Node> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "t", rename_all = "snake_case")]
pub enum Node {
    Leaf { p_correct: f64 },
    Split { feature: usize, threshold: f64, left: Box<Node>, right: Box<Node> },
}

impl Node {
    fn predict(&self, x: &[f64]) -> f64 {
        match self {
            Node::Leaf { p_correct } => *p_correct,
            Node::Split { feature, threshold, left, right } => {
                if x[*feature] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetaClassifier {
    pub backend: MetaBackend,
    pub n_classes: usize,
    pub threshold: f64,
    pub state: MetaState,
}

impl MetaClassifier {
    pub fn n_features(&self) -> usize {
        4 + 2 * self.n_classes
    }

    fn check_schema(&self, r: &PredictionRecord) -> Result<()> {
        if r.n_classes() != self.n_classes {
            return Err(Error::config(format!(
                "meta-classifier expects {} classes, record {} has {}",
                self.n_classes,
                r.tree_id,
                r.n_classes()
            )));
        }
        Ok(())
    }

    /// Score in `[0, 1]`; larger means more likely correct.
    pub fn score(&self, r: &PredictionRecord) -> Result<f64> {
        self.check_schema(r)?;
        let x = meta_features(r);
        Ok(match &self.state {
            MetaState::Constant { correct } => {
                if *correct {
                    1.0
                } else {
                    0.0
                }
            }
            MetaState::Linear { weights, bias, mean, std } => {
                let z = standardize(&x, mean, std);
                sigmoid(bias + weights.iter().zip(&z).map(|(w, v)| w * v).sum::<f64>())
            }
            MetaState::Forest { trees } => trees.iter().map(|t| t.predict(&x)).sum::<f64>() / trees.len() as f64,
        })
    }

    pub fn predict_correct(&self, r: &PredictionRecord) -> Result<bool> {
        Ok(self.score(r)? >= self.threshold)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// One meta-classifier per test fold, as produced by the dev-fold protocol.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldedMeta {
    pub by_fold: BTreeMap<usize, MetaClassifier>,
}

impl FoldedMeta {
    pub fn for_fold(&self, fold: usize) -> Result<&MetaClassifier> {
        self.by_fold
            .get(&fold)
            .ok_or_else(|| Error::config(format!("no meta-classifier for fold {fold}")))
    }
}

fn standardize(x: &[f64], mean: &[f64], std: &[f64]) -> Vec<f64> {
    x.iter().zip(mean).zip(std).map(|((v, m), s)| (v - m) / s).collect()
}

/// Fits a correct-vs-incorrect classifier on dev-set records.
pub fn train_meta(dev: &[PredictionRecord], backend: MetaBackend, hp: &MetaHyperparams, seed: u64) -> Result<MetaClassifier> {
    let first = dev.first().ok_or_else(|| Error::config("meta-classifier needs dev records"))?;
    let n_classes = first.n_classes();
    if let Some(r) = dev.iter().find(|r| r.n_classes() != n_classes) {
        return Err(Error::config(format!("dev record {} has a different class count", r.tree_id)));
    }
    let make = |state| MetaClassifier { backend, n_classes, threshold: hp.threshold, state };
    let n_correct = dev.iter().filter(|r| r.correct).count();
    if n_correct == 0 || n_correct == dev.len() {
        log::warn!("dev records are all {}; meta-classifier is constant", if n_correct == 0 { "incorrect" } else { "correct" });
        return Ok(make(MetaState::Constant { correct: n_correct > 0 }));
    }
    let xs: Vec<Vec<f64>> = dev.iter().map(meta_features).collect();
    let ys: Vec<bool> = dev.iter().map(|r| r.correct).collect();
    let state = match backend {
        MetaBackend::LinearHinge => fit_linear(&xs, &ys, hp),
        MetaBackend::RandomForest => fit_forest(&xs, &ys, hp, seed),
    };
    Ok(make(state))
}

/// Full-batch subgradient descent on the L2-regularized hinge loss over
/// z-scored features.
fn fit_linear(xs: &[Vec<f64>], ys: &[bool], hp: &MetaHyperparams) -> MetaState {
    let n = xs.len() as f64;
    let d = xs[0].len();
    let mean: Vec<f64> = (0..d).map(|j| xs.iter().map(|x| x[j]).sum::<f64>() / n).collect();
    let std: Vec<f64> = (0..d)
        .map(|j| {
            let v = xs.iter().map(|x| (x[j] - mean[j]).powi(2)).sum::<f64>() / n;
            if v > 1e-24 {
                v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    let zs: Vec<Vec<f64>> = xs.iter().map(|x| standardize(x, &mean, &std)).collect();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    for _ in 0..hp.epochs {
        let mut gw: Vec<f64> = w.iter().map(|wi| hp.l2 * wi).collect();
        let mut gb = 0.0;
        for (z, &y) in zs.iter().zip(ys) {
            let y = if y { 1.0 } else { -1.0 };
            let margin = y * (b + w.iter().zip(z).map(|(a, c)| a * c).sum::<f64>());
            if margin < 1.0 {
                for (g, zi) in gw.iter_mut().zip(z) {
                    *g -= y * zi / n;
                }
                gb -= y / n;
            }
        }
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= hp.learning_rate * g;
        }
        b -= hp.learning_rate * gb;
    }
    MetaState::Linear { weights: w, bias: b, mean, std }
}

fn fit_forest(xs: &[Vec<f64>], ys: &[bool], hp: &MetaHyperparams, seed: u64) -> MetaState {
    let base = RngState::new(seed);
    let n = xs.len();
    let n_boot = ((hp.bootstrap_fraction * n as f64).round() as usize).max(1);
    let mtry = ((xs[0].len() as f64).sqrt().ceil() as usize).max(1);
    let trees = (0..hp.n_trees.max(1))
        .into_par_iter()
        .map(|t| {
            let mut rng = base.fork(t as u64);
            let sample: Vec<usize> = (0..n_boot).map(|_| rng.below(n)).collect();
            grow(xs, ys, sample, 0, hp, mtry, &mut rng)
        })
        .collect();
    MetaState::Forest { trees }
}

fn gini(pos: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = pos as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

fn grow(
    xs: &[Vec<f64>],
    ys: &[bool],
    idx: Vec<usize>,
    depth: usize,
    hp: &MetaHyperparams,
    mtry: usize,
    rng: &mut RngState,
) -> Node {
    let pos = idx.iter().filter(|&&i| ys[i]).count();
    let leaf = Node::Leaf { p_correct: pos as f64 / idx.len() as f64 };
    if depth >= hp.max_depth || idx.len() < hp.min_samples_split.max(2) || pos == 0 || pos == idx.len() {
        return leaf;
    }
    let mut features: Vec<usize> = (0..xs[0].len()).collect();
    features.shuffle(rng);
    let parent = gini(pos, idx.len());
    let mut best: Option<(f64, usize, f64)> = None;
    for &f in features.iter().take(mtry) {
        let mut vals: Vec<(f64, bool)> = idx.iter().map(|&i| (xs[i][f], ys[i])).collect();
        vals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total = vals.len();
        let mut left_pos = 0;
        for k in 0..total - 1 {
            if vals[k].1 {
                left_pos += 1;
            }
            if vals[k].0 == vals[k + 1].0 {
                continue;
            }
            let nl = k + 1;
            let nr = total - nl;
            let impurity = (nl as f64 * gini(left_pos, nl) + nr as f64 * gini(pos - left_pos, nr)) / total as f64;
            if impurity < parent - 1e-12 && best.is_none_or(|(b, _, _)| impurity < b) {
                best = Some((impurity, f, 0.5 * (vals[k].0 + vals[k + 1].0)));
            }
        }
    }
    let Some((_, feature, threshold)) = best else {
        return leaf;
    };
    let (l, r): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| xs[i][feature] <= threshold);
    Node::Split {
        feature,
        threshold,
        left: Box::new(grow(xs, ys, l, depth + 1, hp, mtry, rng)),
        right: Box::new(grow(xs, ys, r, depth + 1, hp, mtry, rng)),
    }
}

/// Outcome of supervised rejection.
#[derive(Debug, Clone, PartialEq)]
pub struct SupervisedOutcome<'a> {
    pub retained: Vec<&'a PredictionRecord>,
    pub removed: Vec<&'a PredictionRecord>,
    pub n_removed: usize,
}

/// Withholds every record the meta-classifier labels incorrect.
pub fn supervised_reject<'a>(meta: &MetaClassifier, records: &'a [PredictionRecord]) -> Result<SupervisedOutcome<'a>> {
    supervised_reject_at(meta, records, meta.threshold)
}

/// As [`supervised_reject`] with an explicit score threshold.
pub fn supervised_reject_at<'a>(meta: &MetaClassifier, records: &'a [PredictionRecord], threshold: f64) -> Result<SupervisedOutcome<'a>> {
    let mut retained = Vec::new();
    let mut removed = Vec::new();
    for r in records {
        if meta.score(r)? >= threshold {
            retained.push(r);
        } else {
            removed.push(r);
        }
    }
    let n_removed = removed.len();
    Ok(SupervisedOutcome { retained, removed, n_removed })
}

/// Supervised rejection where each record is judged by its own fold's
/// meta-classifier.
pub fn supervised_reject_folded<'a>(meta: &FoldedMeta, records: &'a [PredictionRecord]) -> Result<SupervisedOutcome<'a>> {
    let mut retained = Vec::new();
    let mut removed = Vec::new();
    for r in records {
        if meta.for_fold(r.fold)?.predict_correct(r)? {
            retained.push(r);
        } else {
            removed.push(r);
        }
    }
    let n_removed = removed.len();
    Ok(SupervisedOutcome { retained, removed, n_removed })
}
