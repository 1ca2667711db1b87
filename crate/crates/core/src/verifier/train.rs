use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::draw_noise;
use super::model::{Architecture, ModelParams, VarianceMode};
use crate::data::{class_count, decompose_branches_capped, embed_tweet, ConversationTree, Embedder, FoldSpec};
use crate::error::{Error, Result};
use crate::nn::{argmax, sgd_step, Adam, DropoutSpec, Parameters, RngState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub hidden_size: usize,
    pub num_relu_layers: usize,
    pub dropout_rate_train: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    /// `T`, the number of noise draws in the aleatoric loss.
    pub aleatoric_samples: usize,
    pub w1: f64,
    pub w2: f64,
    pub seed: u64,
    pub variance_mode: VarianceMode,
    pub max_branch_len: Option<usize>,
    /// Global gradient-norm clip applied before each update.
    pub grad_clip: Option<f64>,
    pub optimizer: Optimizer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Plain SGD with a fixed learning rate.
    #[default]
    Sgd,
    Adam,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            hidden_size: 64,
            num_relu_layers: 2,
            dropout_rate_train: 0.3,
            learning_rate: 0.01,
            epochs: 30,
            aleatoric_samples: 50,
            w1: 1.0,
            w2: 0.2,
            seed: 0,
            variance_mode: VarianceMode::Scalar,
            max_branch_len: None,
            grad_clip: None,
            optimizer: Optimizer::Sgd,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.aleatoric_samples == 0 {
            return Err(Error::config("aleatoric_samples (T) must be >= 1"));
        }
        if self.w1 < 0.0 || self.w2 < 0.0 || (self.w1 == 0.0 && self.w2 == 0.0) {
            return Err(Error::config("loss weights must be >= 0 and not both 0"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate_train) {
            return Err(Error::config("dropout_rate_train must lie in [0, 1)"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate must be > 0"));
        }
        if self.hidden_size == 0 {
            return Err(Error::config("hidden_size must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub loss_total: f64,
    pub loss_l1: f64,
    pub loss_l2: f64,
}

/// Per-epoch mean branch losses.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingHistory(pub Vec<EpochStats>);

impl TrainingHistory {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss_total,loss_l1,loss_l2\n");
        for e in &self.0 {
            s.push_str(&format!("{},{},{},{}\n", e.epoch, e.loss_total, e.loss_l1, e.loss_l2));
        }
        s
    }
}

/// A tree with every branch already embedded tweet by tweet.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedTree {
    pub tree_id: String,
    pub branches: Vec<Vec<Vec<f64>>>,
}

pub fn encode_tree(tree: &ConversationTree, embedder: &Embedder, max_branch_len: Option<usize>) -> EncodedTree {
    let branches = decompose_branches_capped(tree, max_branch_len)
        .iter()
        .map(|b| b.tweets.iter().map(|t| embed_tweet(&t.text, embedder)).collect())
        .collect();
    EncodedTree { tree_id: tree.tree_id.clone(), branches }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TreePrediction {
    pub probs: Vec<f64>,
    pub class: usize,
}

/// Mean of the branch probability vectors.
pub fn predict_encoded(params: &ModelParams, tree: &EncodedTree, dropout: DropoutSpec, rng: &mut RngState) -> Result<Vec<f64>> {
    let c = params.n_classes();
    let mut mean = vec![0.0; c];
    for b in &tree.branches {
        let out = params.forward_branch(b, dropout, rng)?;
        for (m, p) in mean.iter_mut().zip(&out.p) {
            *m += p;
        }
    }
    let n = tree.branches.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    Ok(mean)
}

/// Deterministic tree-level prediction; argmax ties go to the lowest class.
pub fn predict_tree(params: &ModelParams, tree: &ConversationTree, embedder: &Embedder, max_branch_len: Option<usize>) -> Result<TreePrediction> {
    let enc = encode_tree(tree, embedder, max_branch_len);
    let probs = predict_encoded(params, &enc, DropoutSpec::off(), &mut RngState::new(0))?;
    let class = argmax(&probs);
    Ok(TreePrediction { probs, class })
}

/// Trains on every tree outside `test_fold` and the dev fold.
pub fn train(
    trees: &[ConversationTree],
    folds: &FoldSpec,
    test_fold: usize,
    embedder: &Embedder,
    config: &TrainingConfig,
) -> Result<(ModelParams, TrainingHistory)> {
    let n_classes = class_count(trees);
    let examples: Vec<(EncodedTree, usize)> = trees
        .iter()
        .filter(|t| {
            let f = folds.fold_of(&t.tree_id);
            f.is_some() && f != Some(test_fold) && f != folds.dev_fold
        })
        .map(|t| (encode_tree(t, embedder, config.max_branch_len), t.label.index()))
        .collect();
    train_on(&examples, embedder.dimension(), n_classes, config)
}

/// Per-branch SGD over the branches of `examples` (tree, class index).
pub fn train_on(
    examples: &[(EncodedTree, usize)],
    input_dim: usize,
    n_classes: usize,
    config: &TrainingConfig,
) -> Result<(ModelParams, TrainingHistory)> {
    config.validate()?;
    let instances: Vec<(&Vec<Vec<f64>>, usize)> = examples
        .iter()
        .flat_map(|(t, y)| t.branches.iter().map(move |b| (b, *y)))
        .collect();
    if instances.is_empty() {
        return Err(Error::config("training set is empty"));
    }
    if let Some((_, y)) = instances.iter().find(|(_, y)| *y >= n_classes) {
        return Err(Error::data(format!("label {y} outside {n_classes} classes")));
    }
    let arch = Architecture {
        input_dim,
        hidden_size: config.hidden_size,
        num_relu_layers: config.num_relu_layers,
        n_classes,
        variance_mode: config.variance_mode,
    };
    let mut params = ModelParams::init(arch, &mut RngState::with_stream(config.seed, 0))?;
    let mut rng = RngState::with_stream(config.seed, 1);
    let dropout = DropoutSpec::active(config.dropout_rate_train)?;
    let mut grads = params.zeros_like();
    let mut order: Vec<usize> = (0..instances.len()).collect();
    let mut history = TrainingHistory::default();
    let mut adam = (config.optimizer == Optimizer::Adam).then(|| Adam::new(&params, config.learning_rate));

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let (mut total, mut l1, mut l2) = (0.0, 0.0, 0.0);
        for &i in &order {
            let (inputs, y) = instances[i];
            let noise = if config.w2 != 0.0 {
                draw_noise(config.aleatoric_samples, n_classes, &mut rng)
            } else {
                Vec::new()
            };
            grads.zero();
            let loss = params.loss_and_grad(inputs, y, &noise, config.w1, config.w2, dropout, &mut rng, &mut grads)?;
            if let Some(clip) = config.grad_clip {
                clip_norm(&mut grads, clip);
            }
            match adam.as_mut() {
                Some(opt) => opt.step(&mut params, &grads)?,
                None => sgd_step(&mut params, &grads, config.learning_rate)?,
            }
            total += loss.total;
            l1 += loss.l1;
            l2 += loss.l2;
        }
        let n = instances.len() as f64;
        let stats = EpochStats { epoch, loss_total: total / n, loss_l1: l1 / n, loss_l2: l2 / n };
        log::debug!("epoch {epoch}: loss {:.5}", stats.loss_total);
        history.0.push(stats);
    }
    Ok((params, history))
}

fn clip_norm(grads: &mut ModelParams, max_norm: f64) {
    let norm: f64 = grads
        .tensors()
        .iter()
        .flat_map(|(_, t)| t.data().iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt();
    if norm > max_norm {
        let scale = max_norm / norm;
        for (_, t) in grads.tensors_mut() {
            t.data_mut().iter_mut().for_each(|g| *g *= scale);
        }
    }
}
