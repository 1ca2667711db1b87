//! Cross-validation, metrics, statistics, timelines and synthetic data.

mod cv;
mod groups;
mod metrics;
mod stats;
mod synth;
mod timeline;

pub use cv::{cross_validate, fold_seed, run, score_trees, CvOutput, FoldResult, MetaConfig, RunConfig};
pub use groups::{group_uncertainty_by, Group, GroupKey};
pub use metrics::{evaluate, MetricsReport};
pub use stats::{average_ranks, chi_square_sf, gamma_q, kruskal_wallis, ln_gamma, KruskalWallis};
pub use synth::{generate, generate_synthetic, write_synthetic, SyntheticSpec, SyntheticTree};
pub use timeline::{
    min_uncertainty_prediction, min_uncertainty_step, timeline_report, TimelineSeries, TimelineStep,
};
