use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Accuracy and F-scores over a fixed class set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_f: f64,
    pub per_class_f1: Vec<f64>,
    pub n_instances: usize,
    /// Classes whose F1 is 0/0 (never predicted and never gold), scored as 0.
    pub undefined_f1: Vec<usize>,
}

/// Macro-F averages the per-class F1 over all `n_classes` classes, whether
/// present or not.
pub fn evaluate(gold: &[usize], pred: &[usize], n_classes: usize) -> Result<MetricsReport> {
    if gold.len() != pred.len() {
        return Err(Error::data(format!("{} gold labels for {} predictions", gold.len(), pred.len())));
    }
    if gold.is_empty() {
        return Err(Error::data("cannot evaluate an empty prediction set"));
    }
    if let Some(bad) = gold.iter().chain(pred).find(|&&c| c >= n_classes) {
        return Err(Error::data(format!("label {bad} outside the {n_classes}-class set")));
    }
    let mut tp = vec![0usize; n_classes];
    let mut fp = vec![0usize; n_classes];
    let mut fneg = vec![0usize; n_classes];
    for (&g, &p) in gold.iter().zip(pred) {
        if g == p {
            tp[g] += 1;
        } else {
            fp[p] += 1;
            fneg[g] += 1;
        }
    }
    let mut undefined = Vec::new();
    let per_class_f1: Vec<f64> = (0..n_classes)
        .map(|k| {
            let denom = 2 * tp[k] + fp[k] + fneg[k];
            if denom == 0 {
                undefined.push(k);
                0.0
            } else {
                2.0 * tp[k] as f64 / denom as f64
            }
        })
        .collect();
    let correct: usize = tp.iter().sum();
    Ok(MetricsReport {
        accuracy: correct as f64 / gold.len() as f64,
        macro_f: per_class_f1.iter().sum::<f64>() / n_classes as f64,
        per_class_f1,
        n_instances: gold.len(),
        undefined_f1: undefined,
    })
}
