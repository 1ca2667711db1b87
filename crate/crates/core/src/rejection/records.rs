//! Per-tree prediction records and their CSV form.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::uncertainty::UncertaintyBundle;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub tree_id: String,
    pub label: usize,
    pub predicted: usize,
    pub correct: bool,
    pub bundle: UncertaintyBundle,
    pub fold: usize,
    /// Conversation size in tweets.
    pub n_tweets: usize,
}

impl PredictionRecord {
    pub fn new(tree_id: impl Into<String>, label: usize, bundle: UncertaintyBundle, fold: usize, n_tweets: usize) -> Self {
        let predicted = bundle.predicted_class;
        PredictionRecord { tree_id: tree_id.into(), label, predicted, correct: label == predicted, bundle, fold, n_tweets }
    }

    pub fn n_classes(&self) -> usize {
        self.bundle.mean_probs.len()
    }
}

const FIXED: [&str; 11] = [
    "tree_id", "label", "pred", "vr", "entropy", "variance", "aleatoric", "lcs", "margin", "ratio", "softmax_entropy",
];

/// Writes `tree_id,label,pred,vr,entropy,variance,aleatoric,lcs,margin,ratio,
/// softmax_entropy,p_0..p_{C-1},fold,n_tweets`.
pub fn write_records(records: &[PredictionRecord], writer: impl Write) -> Result<()> {
    let c = records.first().map_or(0, |r| r.n_classes());
    let mut w = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = FIXED.iter().map(|s| s.to_string()).collect();
    header.extend((0..c).map(|k| format!("p_{k}")));
    header.push("fold".into());
    header.push("n_tweets".into());
    w.write_record(&header)?;
    for r in records {
        if r.n_classes() != c {
            return Err(Error::data("records disagree on the class count"));
        }
        let b = &r.bundle;
        let mut row = vec![
            r.tree_id.clone(),
            r.label.to_string(),
            r.predicted.to_string(),
            b.variation_ratio.to_string(),
            b.entropy.to_string(),
            b.variance.to_string(),
            b.aleatoric.to_string(),
            b.softmax_lcs.to_string(),
            b.softmax_margin.to_string(),
            b.softmax_ratio.to_string(),
            b.softmax_entropy.to_string(),
        ];
        row.extend(b.mean_probs.iter().map(|p| p.to_string()));
        row.push(r.fold.to_string());
        row.push(r.n_tweets.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn records_to_csv(records: &[PredictionRecord]) -> Result<String> {
    let mut buf = Vec::new();
    write_records(records, &mut buf)?;
    Ok(String::from_utf8(buf).expect("csv output is UTF-8"))
}

/// Reads records written by [`write_records`]. The trailing `fold` and
/// `n_tweets` columns are optional and default to 0.
pub fn read_records(reader: impl Read) -> Result<Vec<PredictionRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    let names: Vec<&str> = header.iter().collect();
    if names.len() < FIXED.len() + 2 || names[..FIXED.len()] != FIXED {
        return Err(Error::data(format!("unexpected record header: {}", names.join(","))));
    }
    let n_classes = names[FIXED.len()..].iter().take_while(|n| n.starts_with("p_")).count();
    if n_classes < 2 {
        return Err(Error::data("record file needs at least two p_k columns"));
    }
    let col = |name: &str| names.iter().position(|n| *n == name);
    let fold_col = col("fold");
    let size_col = col("n_tweets");
    let mut out = Vec::new();
    for (line, row) in rdr.records().enumerate() {
        let row = row?;
        let num = |i: usize| -> Result<f64> {
            row.get(i)
                .ok_or_else(|| Error::data(format!("row {}: missing column {i}", line + 2)))?
                .parse::<f64>()
                .map_err(|e| Error::data(format!("row {}: column {}: {e}", line + 2, names[i])))
        };
        let int = |i: usize| -> Result<usize> {
            row.get(i)
                .ok_or_else(|| Error::data(format!("row {}: missing column {i}", line + 2)))?
                .parse::<usize>()
                .map_err(|e| Error::data(format!("row {}: column {}: {e}", line + 2, names[i])))
        };
        let mean_probs = (0..n_classes).map(|k| num(FIXED.len() + k)).collect::<Result<Vec<_>>>()?;
        let bundle = UncertaintyBundle {
            variation_ratio: num(3)?,
            entropy: num(4)?,
            variance: num(5)?,
            aleatoric: num(6)?,
            softmax_lcs: num(7)?,
            softmax_margin: num(8)?,
            softmax_ratio: num(9)?,
            softmax_entropy: num(10)?,
            mean_probs,
            predicted_class: int(2)?,
        };
        let label = int(1)?;
        if label >= n_classes || bundle.predicted_class >= n_classes {
            return Err(Error::data(format!("row {}: class outside 0..{n_classes}", line + 2)));
        }
        let fold = fold_col.map(&int).transpose()?.unwrap_or(0);
        let n_tweets = size_col.map(&int).transpose()?.unwrap_or(0);
        out.push(PredictionRecord::new(row[0].to_string(), label, bundle, fold, n_tweets));
    }
    Ok(out)
}

pub fn load_records(path: impl AsRef<std::path::Path>) -> Result<Vec<PredictionRecord>> {
    read_records(std::fs::File::open(path)?)
}
