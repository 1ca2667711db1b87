//! Expected calibration error, reliability bins and histogram binning.
//!
//! Bins are equal width over `[0, 1]` and right-inclusive: confidence `c`
//! falls in bin `ceil(c * M)` (1-based), with `c = 0` in bin 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rejection::{Measure, PredictionRecord};
use crate::uncertainty::UncertaintyBundle;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRecord {
    pub confidence: f64,
    pub correct: bool,
}

impl ConfidenceRecord {
    pub fn new(confidence: f64, correct: bool) -> Result<Self> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::data(format!("confidence {confidence} outside [0, 1]")));
        }
        Ok(ConfidenceRecord { confidence, correct })
    }
}

/// Dev-set range used to rescale unbounded measures.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub min: f64,
    pub max: f64,
}

impl NormStats {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Option<Self> {
        values.into_iter().fold(None, |acc, v| match acc {
            None => Some(NormStats { min: v, max: v }),
            Some(s) => Some(NormStats { min: s.min.min(v), max: s.max.max(v) }),
        })
    }

    fn normalize(&self, v: f64) -> f64 {
        if self.max > self.min {
            ((v - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        } else {
            0.5
        }
    }
}

/// Dev statistics for `measure`; only aleatoric needs them.
pub fn fit_confidence_stats(dev: &[PredictionRecord], measure: Measure) -> Option<NormStats> {
    if measure != Measure::Aleatoric {
        return None;
    }
    let stats = NormStats::from_values(dev.iter().map(|r| r.bundle.aleatoric))?;
    if stats.max <= stats.min {
        log::warn!("aleatoric dev range is degenerate; every confidence becomes 0.5");
    }
    Some(stats)
}

/// Maps a measure to a confidence in `[0, 1]`.
///
/// `lcs` and `margin` pass through, entropies are divided by `ln C` first,
/// aleatoric is min-max scaled with dev `stats`, and everything else is
/// `1 - u`.
pub fn to_confidence(b: &UncertaintyBundle, measure: Measure, stats: Option<&NormStats>) -> Result<f64> {
    let u = measure.raw(b);
    let c = match measure {
        Measure::Lcs | Measure::Margin => u,
        Measure::Entropy | Measure::SoftmaxEntropy => {
            let n = b.mean_probs.len();
            if n < 2 {
                return Err(Error::data("entropy confidence needs at least two classes"));
            }
            1.0 - u / (n as f64).ln()
        }
        Measure::Aleatoric => {
            let s = stats.ok_or_else(|| Error::config("aleatoric confidence needs dev min/max"))?;
            1.0 - s.normalize(u)
        }
        Measure::VariationRatio | Measure::Variance | Measure::Ratio => 1.0 - u,
    };
    Ok(c.clamp(0.0, 1.0))
}

pub fn confidence_records(records: &[PredictionRecord], measure: Measure, stats: Option<&NormStats>) -> Result<Vec<ConfidenceRecord>> {
    records
        .iter()
        .map(|r| Ok(ConfidenceRecord { confidence: to_confidence(&r.bundle, measure, stats)?, correct: r.correct }))
        .collect()
}

/// 0-based bin for confidence `c` among `m` bins.
pub fn bin_index(c: f64, m: usize) -> usize {
    let b = (c * m as f64).ceil() as usize;
    b.clamp(1, m) - 1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// `None` for empty bins.
    pub mean_confidence: Option<f64>,
    pub accuracy: Option<f64>,
}

fn check(records: &[ConfidenceRecord], m: usize) -> Result<()> {
    if m == 0 {
        return Err(Error::config("bin count must be >= 1"));
    }
    if records.is_empty() {
        return Err(Error::config("calibration needs at least one record"));
    }
    Ok(())
}

fn edge(k: usize, m: usize) -> f64 {
    if k == m {
        1.0
    } else {
        k as f64 / m as f64
    }
}

pub fn reliability_bins(records: &[ConfidenceRecord], m: usize) -> Result<Vec<ReliabilityBin>> {
    check(records, m)?;
    let mut count = vec![0usize; m];
    let mut conf = vec![0.0; m];
    let mut hits = vec![0usize; m];
    for r in records {
        let b = bin_index(r.confidence, m);
        count[b] += 1;
        conf[b] += r.confidence;
        hits[b] += r.correct as usize;
    }
    Ok((0..m)
        .map(|b| ReliabilityBin {
            lower: edge(b, m),
            upper: edge(b + 1, m),
            count: count[b],
            mean_confidence: (count[b] > 0).then(|| conf[b] / count[b] as f64),
            accuracy: (count[b] > 0).then(|| hits[b] as f64 / count[b] as f64),
        })
        .collect())
}

/// `sum_m |B_m|/n * |acc(B_m) - conf(B_m)|`.
pub fn ece(records: &[ConfidenceRecord], m: usize) -> Result<f64> {
    let n = records.len() as f64;
    Ok(reliability_bins(records, m)?
        .iter()
        .filter_map(|b| {
            let (acc, conf) = (b.accuracy?, b.mean_confidence?);
            Some(b.count as f64 / n * (acc - conf).abs())
        })
        .sum())
}

/// Per-bin lookup table from confidence to held-out accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMap {
    pub probabilities: Vec<f64>,
    pub dev_counts: Vec<usize>,
}

impl CalibrationMap {
    pub fn identity(m: usize) -> Self {
        CalibrationMap { probabilities: (0..m).map(|b| (b as f64 + 0.5) / m as f64).collect(), dev_counts: vec![0; m] }
    }

    pub fn n_bins(&self) -> usize {
        self.probabilities.len()
    }

    pub fn edges(&self) -> Vec<f64> {
        let m = self.n_bins();
        (0..=m).map(|k| edge(k, m)).collect()
    }
}

/// Empty dev bins keep their midpoint.
pub fn fit_histogram_binning(dev: &[ConfidenceRecord], m: usize) -> Result<CalibrationMap> {
    let bins = reliability_bins(dev, m)?;
    let mut map = CalibrationMap::identity(m);
    for (k, b) in bins.iter().enumerate() {
        if let Some(acc) = b.accuracy {
            map.probabilities[k] = acc;
        }
        map.dev_counts[k] = b.count;
    }
    Ok(map)
}

pub fn apply_calibration(map: &CalibrationMap, confidence: f64) -> f64 {
    map.probabilities[bin_index(confidence, map.n_bins())]
}

pub fn calibrate_records(map: &CalibrationMap, records: &[ConfidenceRecord]) -> Vec<ConfidenceRecord> {
    records
        .iter()
        .map(|r| ConfidenceRecord { confidence: apply_calibration(map, r.confidence), correct: r.correct })
        .collect()
}

/// One row of the calibration table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub measure: Measure,
    pub ece_before: f64,
    pub ece_after: f64,
    pub bins: usize,
    pub n_dev: usize,
    pub n_test: usize,
}

impl CalibrationReport {
    pub const CSV_HEADER: &'static str = "measure,ece_before,ece_after,M,n_dev,n_test";

    pub fn csv_row(&self) -> String {
        format!("{},{},{},{},{},{}", self.measure, self.ece_before, self.ece_after, self.bins, self.n_dev, self.n_test)
    }
}

/// Fits histogram binning for `measure` on `dev` and scores `test` before
/// and after.
pub fn calibration_report(
    dev: &[PredictionRecord],
    test: &[PredictionRecord],
    measure: Measure,
    m: usize,
) -> Result<(CalibrationReport, CalibrationMap)> {
    if dev.is_empty() || test.is_empty() {
        return Err(Error::config("calibration needs nonempty dev and test records"));
    }
    let stats = fit_confidence_stats(dev, measure);
    let dev_c = confidence_records(dev, measure, stats.as_ref())?;
    let test_c = confidence_records(test, measure, stats.as_ref())?;
    let map = fit_histogram_binning(&dev_c, m)?;
    let report = CalibrationReport {
        measure,
        ece_before: ece(&test_c, m)?,
        ece_after: ece(&calibrate_records(&map, &test_c), m)?,
        bins: m,
        n_dev: dev.len(),
        n_test: test.len(),
    };
    Ok((report, map))
}

/// `bin,lower,upper,count,mean_confidence,accuracy` with `NA` for empty bins.
pub fn reliability_csv(bins: &[ReliabilityBin]) -> String {
    let na = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), |x| x.to_string());
    let mut out = String::from("bin,lower,upper,count,mean_confidence,accuracy\n");
    for (k, b) in bins.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            k + 1,
            b.lower,
            b.upper,
            b.count,
            na(b.mean_confidence),
            na(b.accuracy)
        ));
    }
    out
}
