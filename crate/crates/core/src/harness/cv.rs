//! Cross-validation: train per fold, score the held-out fold with
//! uncertainty bundles, and pool the records.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{class_count, ConversationTree, Embedder, EmbedderConfig, FoldSpec};
use crate::error::{Error, Result};
use crate::nn::splitmix64;
use crate::rejection::{MetaBackend, MetaHyperparams, PredictionRecord};
use crate::uncertainty::{bundle, UncertaintyConfig};
use crate::verifier::{encode_tree, train_on, EncodedTree, ModelParams, TrainingConfig, TrainingHistory};

/// Everything the `train` command reads from its JSON config.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub training: TrainingConfig,
    pub uncertainty: UncertaintyConfig,
    pub embedder: EmbedderConfig,
    pub meta: MetaConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetaConfig {
    pub backend: MetaBackend,
    pub hyperparams: MetaHyperparams,
    pub seed: u64,
}

impl Default for MetaConfig {
    fn default() -> Self {
        MetaConfig { backend: MetaBackend::LinearHinge, hyperparams: MetaHyperparams::default(), seed: 0 }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.training.validate()?;
        self.uncertainty.validate()
    }
}

#[derive(Debug, Clone)]
pub struct FoldResult {
    pub fold: usize,
    pub params: ModelParams,
    pub history: TrainingHistory,
    pub test: Vec<PredictionRecord>,
    pub dev: Vec<PredictionRecord>,
}

#[derive(Debug, Clone)]
pub struct CvOutput {
    /// Test records ordered by fold, then tree id.
    pub records: Vec<PredictionRecord>,
    pub folds: Vec<FoldResult>,
}

impl CvOutput {
    /// Dev records scored by each fold's model, keyed by test fold.
    pub fn dev_records(&self) -> BTreeMap<usize, &[PredictionRecord]> {
        self.folds.iter().map(|f| (f.fold, f.dev.as_slice())).collect()
    }

    pub fn all_dev_records(&self) -> Vec<PredictionRecord> {
        self.folds.iter().flat_map(|f| f.dev.iter().cloned()).collect()
    }
}

/// Training seed for one fold.
pub fn fold_seed(seed: u64, fold: usize) -> u64 {
    splitmix64(seed ^ splitmix64(fold as u64 + 1))
}

/// Bundle and record for every tree in `trees`, tagged with `fold`.
pub fn score_trees(
    params: &ModelParams,
    trees: &[(&ConversationTree, EncodedTree)],
    fold: usize,
    config: &UncertaintyConfig,
) -> Result<Vec<PredictionRecord>> {
    trees
        .par_iter()
        .map(|(t, enc)| {
            let b = bundle(params, enc, config, &config.tree_rng(&t.tree_id))?;
            Ok(PredictionRecord::new(t.tree_id.clone(), t.label.index(), b, fold, t.len()))
        })
        .collect()
}

/// Each non-dev fold is tested once by a model trained on the remaining
/// non-dev folds. With `with_dev`, the dev fold is also scored by every
/// fold's model; those records carry the test fold's id.
pub fn cross_validate(
    trees: &[ConversationTree],
    folds: &FoldSpec,
    embedder: &Embedder,
    training: &TrainingConfig,
    uncertainty: &UncertaintyConfig,
    with_dev: bool,
) -> Result<CvOutput> {
    folds.validate(trees)?;
    uncertainty.validate()?;
    if with_dev && folds.dev_fold.is_none() {
        return Err(Error::config("dev-fold protocol requested but no dev fold is set"));
    }
    let test_folds = folds.test_folds();
    if test_folds.len() < 2 {
        return Err(Error::config("cross-validation needs at least two test folds"));
    }
    let n_classes = class_count(trees);
    let mut sorted: Vec<&ConversationTree> = trees.iter().collect();
    sorted.sort_by(|a, b| a.tree_id.cmp(&b.tree_id));
    let encoded: Vec<(&ConversationTree, EncodedTree)> =
        sorted.par_iter().map(|t| (*t, encode_tree(t, embedder, training.max_branch_len))).collect();
    let fold_of = |t: &ConversationTree| folds.fold_of(&t.tree_id).expect("validated fold");

    let mut results = test_folds
        .par_iter()
        .map(|&k| {
            let examples: Vec<(EncodedTree, usize)> = encoded
                .iter()
                .filter(|(t, _)| {
                    let f = fold_of(t);
                    f != k && Some(f) != folds.dev_fold
                })
                .map(|(t, e)| (e.clone(), t.label.index()))
                .collect();
            let config = TrainingConfig { seed: fold_seed(training.seed, k), ..training.clone() };
            let (params, history) = train_on(&examples, embedder.dimension(), n_classes, &config)?;
            let pick = |want: usize| -> Vec<(&ConversationTree, EncodedTree)> {
                encoded.iter().filter(|(t, _)| fold_of(t) == want).map(|(t, e)| (*t, e.clone())).collect()
            };
            let test = score_trees(&params, &pick(k), k, uncertainty)?;
            let dev = match (with_dev, folds.dev_fold) {
                (true, Some(d)) => score_trees(&params, &pick(d), k, uncertainty)?,
                _ => Vec::new(),
            };
            log::info!("fold {k}: {} test trees, {} dev trees", test.len(), dev.len());
            Ok(FoldResult { fold: k, params, history, test, dev })
        })
        .collect::<Result<Vec<_>>>()?;
    results.sort_by_key(|r| r.fold);
    let records = results.iter().flat_map(|r| r.test.iter().cloned()).collect();
    Ok(CvOutput { records, folds: results })
}

/// Builds the embedder and runs [`cross_validate`] from a [`RunConfig`].
pub fn run(trees: &[ConversationTree], folds: &FoldSpec, config: &RunConfig, with_dev: bool) -> Result<CvOutput> {
    config.validate()?;
    let embedder = config.embedder.build()?;
    cross_validate(trees, folds, &embedder, &config.training, &config.uncertainty, with_dev)
}
