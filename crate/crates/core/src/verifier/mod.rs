//! The branch-LSTM veracity classifier: a single-layer LSTM over the tweets
//! of a branch, a stack of ReLU layers on its final output, a softmax logit
//! head and a softplus variance head.

mod loss;
mod model;
mod train;

pub use loss::{draw_noise, loss_l1, loss_l1_batch, loss_l2, loss_l2_with_noise, total_loss, LOG_FLOOR};
pub use model::{Architecture, BranchLoss, BranchOutput, BranchTrace, ModelParams, Session, VarianceMode};
pub use train::{
    encode_tree, predict_encoded, predict_tree, train, train_on, EncodedTree, EpochStats, Optimizer, TrainingConfig,
    TrainingHistory, TreePrediction,
};
