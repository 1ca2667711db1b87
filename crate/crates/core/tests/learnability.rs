//! The classifier can fit easy data.

use veritas::data::Embedder;
use veritas::harness::{generate_synthetic, SyntheticSpec};
use veritas::nn::argmax;
use veritas::verifier::{encode_tree, predict_tree, train_on, Optimizer, TrainingConfig};

fn separable() -> Vec<veritas::data::ConversationTree> {
    let spec = SyntheticSpec { n_trees_per_class: 40, n_classes: 2, max_tweets: 4, seed: 5, ..Default::default() };
    generate_synthetic(&spec).unwrap()
}

fn config(epochs: usize) -> TrainingConfig {
    TrainingConfig {
        hidden_size: 16,
        num_relu_layers: 1,
        epochs,
        learning_rate: 0.01,
        optimizer: Optimizer::Adam,
        aleatoric_samples: 10,
        ..Default::default()
    }
}

#[test]
fn separable_training_accuracy() {
    let trees = separable();
    let emb = Embedder::hashing(32, 0).unwrap();
    let ex: Vec<_> = trees.iter().map(|t| (encode_tree(t, &emb, None), t.label.index())).collect();
    let (params, _) = train_on(&ex, 32, 2, &config(30)).unwrap();
    let correct = trees
        .iter()
        .filter(|t| argmax(&predict_tree(&params, t, &emb, None).unwrap().probs) == t.label.index())
        .count();
    let acc = correct as f64 / trees.len() as f64;
    assert!(acc >= 0.95, "training accuracy {acc}");
}

#[test]
fn memorization_lowers_loss() {
    let trees: Vec<_> = separable().into_iter().take(4).collect();
    let emb = Embedder::hashing(16, 1).unwrap();
    let ex: Vec<_> = trees.iter().map(|t| (encode_tree(t, &emb, None), t.label.index())).collect();
    let cfg = TrainingConfig { dropout_rate_train: 0.0, ..config(60) };
    let (_, history) = train_on(&ex, 16, 2, &cfg).unwrap();
    let first = history.0.first().unwrap().loss_l1;
    let last = history.0.last().unwrap().loss_l1;
    assert!(last < 0.5 * first, "l1 went from {first} to {last}");
}

#[test]
fn sgd_memorization_ends_below_start() {
    let trees: Vec<_> = separable().into_iter().take(10).collect();
    let emb = Embedder::hashing(16, 2).unwrap();
    let ex: Vec<_> = trees.iter().map(|t| (encode_tree(t, &emb, None), t.label.index())).collect();
    let cfg = TrainingConfig {
        hidden_size: 16,
        num_relu_layers: 1,
        epochs: 40,
        learning_rate: 0.05,
        dropout_rate_train: 0.0,
        aleatoric_samples: 10,
        ..Default::default()
    };
    let (_, history) = train_on(&ex, 16, 2, &cfg).unwrap();
    let first = history.0.first().unwrap().loss_l1;
    let last = history.0.last().unwrap().loss_l1;
    assert!(last < first, "l1 went from {first} to {last}");
}
