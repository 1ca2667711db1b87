//! Instance rejection: withholding predictions that are likely wrong.

mod measure;
mod meta;
mod records;
mod select;

pub use measure::Measure;
pub use meta::{
    meta_features, supervised_reject, supervised_reject_at, supervised_reject_folded, train_meta, FoldedMeta,
    MetaBackend, MetaClassifier, MetaHyperparams, MetaState, Node, SupervisedOutcome,
};
pub use records::{load_records, read_records, records_to_csv, write_records, PredictionRecord};
pub use select::{
    per_fold_partition, per_fold_reject, point_for, random_curve, random_reject, rejection_curve, remove_top,
    retained_count, unsupervised_reject, CurvePoint, Partition, RejectionCurve,
};

#[cfg(test)]
pub(crate) use records::tests::record as test_record;
