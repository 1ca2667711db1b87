//! Unsupervised, random and per-fold rejection, and rejection curves.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::measure::Measure;
use super::records::PredictionRecord;
use crate::error::{Error, Result};
use crate::harness::evaluate;
use crate::nn::RngState;

/// `⌊f·n⌋`, with a small tolerance so that e.g. `0.8 · 600` keeps 480.
pub fn retained_count(n: usize, retain_fraction: f64) -> usize {
    ((retain_fraction * n as f64 + 1e-9).floor() as usize).min(n)
}

fn check_fraction(f: f64) -> Result<()> {
    if !(f > 0.0 && f <= 1.0) {
        return Err(Error::config(format!("retain fraction {f} outside (0, 1]")));
    }
    Ok(())
}

/// Records kept and records withheld; both keep input order.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition<'a> {
    pub retained: Vec<&'a PredictionRecord>,
    pub removed: Vec<&'a PredictionRecord>,
}

/// Removes the `n − ⌊f·n⌋` most uncertain records (ties: smaller tree id
/// removed first).
pub fn unsupervised_reject(records: &[PredictionRecord], measure: Measure, retain_fraction: f64) -> Result<Partition<'_>> {
    check_fraction(retain_fraction)?;
    let n_remove = records.len() - retained_count(records.len(), retain_fraction);
    Ok(remove_top(records, measure, n_remove))
}

/// Removes exactly `n_remove` of the most uncertain records.
pub fn remove_top(records: &[PredictionRecord], measure: Measure, n_remove: usize) -> Partition<'_> {
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by(|&a, &b| {
        let ua = measure.uncertainty(&records[a].bundle);
        let ub = measure.uncertainty(&records[b].bundle);
        ub.total_cmp(&ua).then_with(|| records[a].tree_id.cmp(&records[b].tree_id))
    });
    let mut drop = vec![false; records.len()];
    for &i in order.iter().take(n_remove) {
        drop[i] = true;
    }
    split(records, &drop)
}

fn split<'a>(records: &'a [PredictionRecord], drop: &[bool]) -> Partition<'a> {
    let mut p = Partition { retained: Vec::new(), removed: Vec::new() };
    for (r, &d) in records.iter().zip(drop) {
        if d {
            p.removed.push(r);
        } else {
            p.retained.push(r);
        }
    }
    p
}

/// Uniform sample of `⌊f·n⌋` records without replacement.
pub fn random_reject(records: &[PredictionRecord], retain_fraction: f64, seed: u64) -> Result<Partition<'_>> {
    check_fraction(retain_fraction)?;
    let keep = retained_count(records.len(), retain_fraction);
    let mut rng = RngState::new(seed);
    let chosen = rand::seq::index::sample(&mut rng, records.len(), keep);
    let mut drop = vec![true; records.len()];
    for i in chosen {
        drop[i] = false;
    }
    Ok(split(records, &drop))
}

/// Applies [`unsupervised_reject`] inside every fold and pools the results.
pub fn per_fold_partition(records: &[PredictionRecord], measure: Measure, retain_fraction: f64) -> Result<Partition<'_>> {
    check_fraction(retain_fraction)?;
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, r) in records.iter().enumerate() {
        groups.entry(r.fold).or_default().push(i);
    }
    let mut drop = vec![false; records.len()];
    for idx in groups.values() {
        let fold: Vec<PredictionRecord> = idx.iter().map(|&i| records[i].clone()).collect();
        let n_remove = fold.len() - retained_count(fold.len(), retain_fraction);
        let part = remove_top(&fold, measure, n_remove);
        for removed in part.removed {
            let local = fold.iter().position(|r| std::ptr::eq(r, removed)).expect("member of fold");
            drop[idx[local]] = true;
        }
    }
    Ok(split(records, &drop))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub retain_fraction: f64,
    pub n_remaining: usize,
    /// `None` when nothing is retained.
    pub accuracy: Option<f64>,
    pub macro_f: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionCurve {
    pub measure: String,
    pub points: Vec<CurvePoint>,
}

impl RejectionCurve {
    /// Rows `measure,retain_fraction,n_remaining,accuracy,macro_f`; undefined
    /// metrics are written as `NA`.
    pub fn to_csv(&self, with_header: bool) -> String {
        let mut s = String::new();
        if with_header {
            s.push_str("measure,retain_fraction,n_remaining,accuracy,macro_f\n");
        }
        let fmt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
        for p in &self.points {
            s.push_str(&format!(
                "{},{},{},{},{}\n",
                self.measure,
                p.retain_fraction,
                p.n_remaining,
                fmt(p.accuracy),
                fmt(p.macro_f)
            ));
        }
        s
    }
}

pub fn point_for(retained: &[&PredictionRecord], retain_fraction: f64, n_classes: usize) -> Result<CurvePoint> {
    if retained.is_empty() {
        return Ok(CurvePoint { retain_fraction, n_remaining: 0, accuracy: None, macro_f: None });
    }
    let gold: Vec<usize> = retained.iter().map(|r| r.label).collect();
    let pred: Vec<usize> = retained.iter().map(|r| r.predicted).collect();
    let m = evaluate(&gold, &pred, n_classes)?;
    Ok(CurvePoint {
        retain_fraction,
        n_remaining: retained.len(),
        accuracy: Some(m.accuracy),
        macro_f: Some(m.macro_f),
    })
}

fn check_fractions(fractions: &[f64]) -> Result<()> {
    for f in fractions {
        check_fraction(*f)?;
    }
    if fractions.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::config("retain fractions must be strictly decreasing"));
    }
    Ok(())
}

fn class_count(records: &[PredictionRecord]) -> usize {
    records.first().map_or(2, |r| r.n_classes())
}

pub fn rejection_curve(records: &[PredictionRecord], measure: Measure, fractions: &[f64]) -> Result<RejectionCurve> {
    check_fractions(fractions)?;
    let c = class_count(records);
    let points = fractions
        .iter()
        .map(|&f| point_for(&unsupervised_reject(records, measure, f)?.retained, f, c))
        .collect::<Result<_>>()?;
    Ok(RejectionCurve { measure: measure.name().to_string(), points })
}

pub fn per_fold_reject(records: &[PredictionRecord], measure: Measure, fractions: &[f64]) -> Result<RejectionCurve> {
    check_fractions(fractions)?;
    let c = class_count(records);
    let points = fractions
        .iter()
        .map(|&f| point_for(&per_fold_partition(records, measure, f)?.retained, f, c))
        .collect::<Result<_>>()?;
    Ok(RejectionCurve { measure: measure.name().to_string(), points })
}

pub fn random_curve(records: &[PredictionRecord], fractions: &[f64], seed: u64) -> Result<RejectionCurve> {
    check_fractions(fractions)?;
    let c = class_count(records);
    let points = fractions
        .iter()
        .map(|&f| point_for(&random_reject(records, f, seed)?.retained, f, c))
        .collect::<Result<_>>()?;
    Ok(RejectionCurve { measure: "random".to_string(), points })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rejection::records::tests::record;

    #[test]
    fn keep_everything_at_one() {
        let recs = vec![record("a", 0, 0, 0.9, 0), record("b", 0, 1, 0.1, 0)];
        let p = unsupervised_reject(&recs, Measure::VariationRatio, 1.0).unwrap();
        assert_eq!(p.retained.len(), 2);
        assert!(p.removed.is_empty());
    }

    #[test]
    fn top_one_cut() {
        let recs = vec![record("a", 0, 0, 0.9, 0), record("b", 0, 0, 0.1, 0), record("c", 0, 0, 0.5, 0)];
        let p = unsupervised_reject(&recs, Measure::Entropy, 2.0 / 3.0).unwrap();
        assert_eq!(p.removed.len(), 1);
        assert_eq!(p.removed[0].tree_id, "a");
    }

    #[test]
    fn confidence_measures_are_inverted() {
        // lcs = 1 − u, so the lowest-confidence record goes first.
        let recs = vec![record("a", 0, 0, 0.9, 0), record("b", 0, 0, 0.1, 0)];
        let p = unsupervised_reject(&recs, Measure::Lcs, 0.5).unwrap();
        assert_eq!(p.removed[0].tree_id, "a");
    }

    #[test]
    fn ties_break_by_tree_id() {
        let recs = vec![record("b", 0, 0, 0.5, 0), record("a", 0, 0, 0.5, 0)];
        let p = unsupervised_reject(&recs, Measure::Aleatoric, 0.5).unwrap();
        assert_eq!(p.removed[0].tree_id, "a");
    }

    #[test]
    fn fraction_rounding() {
        assert_eq!(retained_count(600, 0.8), 480);
        assert_eq!(retained_count(3, 2.0 / 3.0), 2);
        assert_eq!(retained_count(10, 0.55), 5);
        assert!(unsupervised_reject(&[], Measure::Ratio, 0.0).is_err());
        assert!(unsupervised_reject(&[], Measure::Ratio, 1.5).is_err());
    }

    #[test]
    fn empty_point_is_undefined() {
        let recs = vec![record("a", 0, 0, 0.9, 0)];
        let c = rejection_curve(&recs, Measure::VariationRatio, &[1.0, 0.5]).unwrap();
        assert_eq!(c.points[1].n_remaining, 0);
        assert_eq!(c.points[1].accuracy, None);
        assert!(c.to_csv(true).ends_with("variation_ratio,0.5,0,NA,NA\n"));
    }

    #[test]
    fn fractions_must_decrease() {
        let recs = vec![record("a", 0, 0, 0.9, 0)];
        assert!(rejection_curve(&recs, Measure::VariationRatio, &[0.5, 1.0]).is_err());
    }

    #[test]
    fn random_is_seeded() {
        let recs: Vec<_> = (0..20).map(|i| record(&format!("t{i}"), 0, 0, 0.1, 0)).collect();
        let a = random_reject(&recs, 0.5, 4).unwrap();
        let b = random_reject(&recs, 0.5, 4).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.retained.len(), 10);
        assert_eq!(random_reject(&recs, 1.0, 9).unwrap().retained.len(), 20);
    }

    #[test]
    fn per_fold_vs_pooled() {
        // Fold 0 holds all the high-uncertainty records.
        let mut recs = Vec::new();
        for i in 0..5 {
            recs.push(record(&format!("hi{i}"), 0, 0, 0.9 + i as f64 * 0.01, 0));
            recs.push(record(&format!("lo{i}"), 0, 0, 0.1 + i as f64 * 0.01, 1));
        }
        let pooled = unsupervised_reject(&recs, Measure::VariationRatio, 0.6).unwrap();
        assert!(pooled.removed.iter().all(|r| r.fold == 0));
        let per = per_fold_partition(&recs, Measure::VariationRatio, 0.6).unwrap();
        assert!(per.removed.iter().any(|r| r.fold == 0));
        assert!(per.removed.iter().any(|r| r.fold == 1));
        assert_eq!(per.removed.len(), 4);
    }
}
