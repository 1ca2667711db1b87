//! Uncertainty and confidence estimators.
//!
//! Epistemic estimates come from Monte-Carlo dropout: the tree is predicted
//! `N` times with dropout active and the spread of the resulting probability
//! vectors is reduced to a variation ratio, a predictive entropy and a
//! maximum per-class variance. Aleatoric uncertainty is the learned σ of the
//! variance head. Single-pass softmax measures (least confidence, margin,
//! ratio, entropy) are computed on the deterministic prediction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{argmax, DropoutSpec, RngState};
use crate::verifier::{predict_encoded, EncodedTree, ModelParams};

/// `N` probability vectors for one instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    rows: Vec<Vec<f64>>,
}

impl SampleSet {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let Some(first) = rows.first() else {
            return Err(Error::InvalidInput("sample set is empty".into()));
        };
        let c = first.len();
        if c < 2 {
            return Err(Error::InvalidInput("sample rows need at least 2 classes".into()));
        }
        for (i, r) in rows.iter().enumerate() {
            if r.len() != c {
                return Err(Error::shape(format!("sample {i} has {} classes, expected {c}", r.len())));
            }
            let s: f64 = r.iter().sum();
            if (s - 1.0).abs() > 1e-9 || r.iter().any(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::InvalidInput(format!("sample {i} is not a probability vector (sum {s})")));
            }
        }
        Ok(SampleSet { rows })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n_samples(&self) -> usize {
        self.rows.len()
    }

    pub fn n_classes(&self) -> usize {
        self.rows[0].len()
    }

    pub fn mean(&self) -> Vec<f64> {
        let n = self.rows.len() as f64;
        let mut m = vec![0.0; self.n_classes()];
        for r in &self.rows {
            for (a, p) in m.iter_mut().zip(r) {
                *a += p;
            }
        }
        m.iter_mut().for_each(|a| *a /= n);
        m
    }
}

/// `1 − N_mode / N`, where `N_mode` counts samples whose argmax is the most
/// frequent class (ties to the lowest class index).
pub fn variation_ratio(s: &SampleSet) -> f64 {
    let mut counts = vec![0usize; s.n_classes()];
    for r in s.rows() {
        counts[argmax(r)] += 1;
    }
    let mut mode = 0;
    for (k, &c) in counts.iter().enumerate() {
        if c > counts[mode] {
            mode = k;
        }
    }
    1.0 - counts[mode] as f64 / s.n_samples() as f64
}

/// Shannon entropy in nats with `0 · ln 0 = 0`.
pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|&x| x * x.ln()).sum::<f64>()
}

/// Entropy of the mean sampled distribution.
pub fn predictive_entropy(s: &SampleSet) -> f64 {
    entropy(&s.mean())
}

/// Largest population variance over the class columns; 0 for a single sample.
/// Columns are shifted by the first row so identical samples give exactly 0.
pub fn max_variance(s: &SampleSet) -> f64 {
    let n = s.n_samples();
    if n < 2 {
        return 0.0;
    }
    let first = &s.rows()[0];
    (0..s.n_classes())
        .map(|k| {
            let d: Vec<f64> = s.rows().iter().map(|r| r[k] - first[k]).collect();
            let m = d.iter().sum::<f64>() / n as f64;
            d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n as f64
        })
        .fold(0.0, f64::max)
}

/// Single-pass softmax measures. `lcs` and `margin` are confidences;
/// `ratio` and `entropy` are uncertainties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxConfidences {
    pub lcs: f64,
    pub margin: f64,
    pub ratio: f64,
    pub entropy: f64,
}

pub fn softmax_confidences(p: &[f64]) -> SoftmaxConfidences {
    let mut sorted = p.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let first = sorted[0];
    let second = sorted.get(1).copied().unwrap_or(0.0);
    SoftmaxConfidences {
        lcs: first,
        margin: first - second,
        ratio: if first > 0.0 { second / first } else { 1.0 },
        entropy: entropy(p),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplingMode {
    /// Each sample is a full branch-averaged tree prediction.
    #[default]
    Tree,
    /// Each branch is sampled on its own; its estimates are averaged.
    Branch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct UncertaintyConfig {
    pub n_samples: usize,
    pub dropout_rate_test: f64,
    pub mode: SamplingMode,
    pub seed: u64,
}

impl Default for UncertaintyConfig {
    fn default() -> Self {
        UncertaintyConfig { n_samples: 25, dropout_rate_test: 0.3, mode: SamplingMode::Tree, seed: 0 }
    }
}

impl UncertaintyConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::config("n_samples must be >= 1"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate_test) {
            return Err(Error::config("dropout_rate_test must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Random stream for one tree, keyed by its id so results do not depend
    /// on evaluation order.
    pub fn tree_rng(&self, tree_id: &str) -> RngState {
        RngState::with_stream(self.seed, crate::nn::string_key(tree_id))
    }
}

/// `n_samples` tree-level predictions with fresh dropout masks. Sample `i`
/// draws from `rng.fork(i)`.
pub fn mc_sample(params: &ModelParams, tree: &EncodedTree, n_samples: usize, dropout_rate: f64, rng: &RngState) -> Result<SampleSet> {
    if n_samples == 0 {
        return Err(Error::config("n_samples must be >= 1"));
    }
    let spec = DropoutSpec::active(dropout_rate)?;
    let rows = (0..n_samples)
        .map(|i| predict_encoded(params, tree, spec, &mut rng.fork(i as u64)))
        .collect::<Result<Vec<_>>>()?;
    SampleSet::new(rows)
}

/// Mean σ over the tree's branches, dropout off.
pub fn aleatoric_score(params: &ModelParams, tree: &EncodedTree) -> Result<f64> {
    let mut rng = RngState::new(0);
    let mut total = 0.0;
    for b in &tree.branches {
        total += params.forward_branch(b, DropoutSpec::off(), &mut rng)?.sigma_score();
    }
    Ok(total / tree.branches.len() as f64)
}

/// Every estimator for one tree.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UncertaintyBundle {
    pub variation_ratio: f64,
    pub entropy: f64,
    pub variance: f64,
    pub aleatoric: f64,
    pub softmax_lcs: f64,
    pub softmax_margin: f64,
    pub softmax_ratio: f64,
    pub softmax_entropy: f64,
    /// Deterministic branch-averaged probabilities.
    pub mean_probs: Vec<f64>,
    pub predicted_class: usize,
}

pub fn bundle(params: &ModelParams, tree: &EncodedTree, config: &UncertaintyConfig, rng: &RngState) -> Result<UncertaintyBundle> {
    config.validate()?;
    let probs = predict_encoded(params, tree, DropoutSpec::off(), &mut RngState::new(0))?;
    let (variation_ratio, entropy, variance) = match config.mode {
        SamplingMode::Tree => {
            let s = mc_sample(params, tree, config.n_samples, config.dropout_rate_test, rng)?;
            (crate::uncertainty::variation_ratio(&s), predictive_entropy(&s), max_variance(&s))
        }
        SamplingMode::Branch => {
            let (mut vr, mut en, mut va) = (0.0, 0.0, 0.0);
            for (b, branch) in tree.branches.iter().enumerate() {
                let single = EncodedTree { tree_id: tree.tree_id.clone(), branches: vec![branch.clone()] };
                let s = mc_sample(params, &single, config.n_samples, config.dropout_rate_test, &rng.fork(b as u64))?;
                vr += crate::uncertainty::variation_ratio(&s);
                en += predictive_entropy(&s);
                va += max_variance(&s);
            }
            let n = tree.branches.len() as f64;
            (vr / n, en / n, va / n)
        }
    };
    let conf = softmax_confidences(&probs);
    Ok(UncertaintyBundle {
        variation_ratio,
        entropy,
        variance,
        aleatoric: aleatoric_score(params, tree)?,
        softmax_lcs: conf.lcs,
        softmax_margin: conf.margin,
        softmax_ratio: conf.ratio,
        softmax_entropy: conf.entropy,
        predicted_class: argmax(&probs),
        mean_probs: probs,
    })
}
