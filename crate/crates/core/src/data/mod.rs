//! Conversation trees and everything derived from them: branches, timeline
//! prefixes, cross-validation folds and tweet embeddings.

mod branches;
mod embed;
mod folds;
mod io;
mod timeline;
mod tree;

pub use branches::{decompose_branches, decompose_branches_capped, Branch};
pub use embed::{embed_tweet, tokenize, Embedder, EmbedderConfig, EmbedderKind};
pub use folds::{make_folds, FoldScheme, FoldSpec};
pub use io::{load_dataset, parse_dataset, read_dataset, to_jsonl, write_dataset};
pub use timeline::{timeline_prefixes, OrderRepair, Timeline};
pub use tree::{class_count, ConversationTree, Label, Stance, Tweet};
