//! Rumour verification with quantified predictive uncertainty.
//!
//! A branch-LSTM classifier reads root-to-leaf paths of a conversation tree
//! and averages their class probabilities into a tree-level verdict. A second
//! output head learns an aleatoric variance through a sampled loss, and
//! Monte-Carlo dropout supplies epistemic estimates. The resulting scores
//! drive instance rejection, calibration and per-conversation timelines.
//!
//! Module map:
//! - [`nn`]: dense/LSTM layers with hand-written gradients, dropout, SGD.
//! - [`data`]: conversation trees, branches, timeline prefixes, folds, embedding.
//! - [`verifier`]: the classifier, its two losses, training and prediction.
//! - [`uncertainty`]: MC-dropout sampling and every uncertainty estimator.
//! - [`rejection`]: unsupervised, supervised (meta-classifier) and random rejection.
//! - [`calibration`]: ECE, reliability bins, histogram binning.
//! - [`harness`]: metrics, cross-validation, Kruskal-Wallis, timelines, synthetic data.

pub mod calibration;
pub mod data;
pub mod error;
pub mod harness;
pub mod nn;
pub mod rejection;
pub mod uncertainty;
pub mod verifier;

pub use error::{Error, Result};
