//! Cross-entropy (l1) and the sampled aleatoric loss (l2).
//!
//! l2 perturbs the logits with Gaussian noise scaled by the learned standard
//! deviation, `d_t = v + √σ ⊙ ε_t`, and averages the cross-entropy of
//! `softmax(d_t)` over `T` draws. `ε_t` has one independent entry per logit;
//! a single shared scalar would cancel inside the softmax.

use crate::error::{Error, Result};
use crate::nn::{softmax_unchecked, RngState};

/// Floor applied to the gold-class probability inside the log.
pub const LOG_FLOOR: f64 = 1e-12;

fn check_target(n: usize, target: usize) -> Result<()> {
    if target >= n {
        return Err(Error::InvalidInput(format!("target class {target} out of range for {n} classes")));
    }
    Ok(())
}

/// `−ln max(p[target], 1e-12)`
pub fn loss_l1(probs: &[f64], target: usize) -> Result<f64> {
    check_target(probs.len(), target)?;
    Ok(-probs[target].max(LOG_FLOOR).ln())
}

/// Mean of [`loss_l1`] over a batch of instances.
pub fn loss_l1_batch(probs: &[Vec<f64>], targets: &[usize]) -> Result<f64> {
    if probs.len() != targets.len() || probs.is_empty() {
        return Err(Error::shape(format!("{} predictions for {} targets", probs.len(), targets.len())));
    }
    let mut total = 0.0;
    for (p, &y) in probs.iter().zip(targets) {
        total += loss_l1(p, y)?;
    }
    Ok(total / probs.len() as f64)
}

/// Gradient of `loss_l1(softmax(v), target)` with respect to `v`.
pub(crate) fn l1_grad_logits(probs: &[f64], target: usize) -> Vec<f64> {
    if probs[target] < LOG_FLOOR {
        return vec![0.0; probs.len()];
    }
    let mut g = probs.to_vec();
    g[target] -= 1.0;
    g
}

/// Standard-normal draws, one row of `n_classes` entries per sample.
pub fn draw_noise(samples: usize, n_classes: usize, rng: &mut RngState) -> Vec<Vec<f64>> {
    (0..samples).map(|_| (0..n_classes).map(|_| rng.normal()).collect()).collect()
}

fn sigma_at(sigma: &[f64], k: usize) -> f64 {
    if sigma.len() == 1 {
        sigma[0]
    } else {
        sigma[k]
    }
}

fn check_sigma(sigma: &[f64], n: usize) -> Result<()> {
    if sigma.len() != 1 && sigma.len() != n {
        return Err(Error::shape(format!("sigma has {} entries; expected 1 or {n}", sigma.len())));
    }
    if let Some(s) = sigma.iter().find(|s| !(**s >= 0.0)) {
        return Err(Error::InvalidInput(format!("negative or NaN variance {s}")));
    }
    Ok(())
}

/// Sampled loss with `T` fresh noise draws from `rng`. `sigma` holds either
/// one variance shared by all logits or one per logit.
pub fn loss_l2(logits: &[f64], sigma: &[f64], target: usize, samples: usize, rng: &mut RngState) -> Result<f64> {
    if samples == 0 {
        return Err(Error::config("aleatoric sample count T must be >= 1"));
    }
    let noise = draw_noise(samples, logits.len(), rng);
    loss_l2_with_noise(logits, sigma, target, &noise)
}

/// Sampled loss with pre-drawn noise (one row per sample).
pub fn loss_l2_with_noise(logits: &[f64], sigma: &[f64], target: usize, noise: &[Vec<f64>]) -> Result<f64> {
    Ok(l2_value_and_grad(logits, sigma, target, noise, false)?.0)
}

/// Loss, gradient w.r.t. the logits, and gradient w.r.t. each sigma entry.
pub(crate) fn l2_value_and_grad(
    logits: &[f64],
    sigma: &[f64],
    target: usize,
    noise: &[Vec<f64>],
    want_grad: bool,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let c = logits.len();
    check_target(c, target)?;
    check_sigma(sigma, c)?;
    if noise.is_empty() {
        return Err(Error::config("aleatoric sample count T must be >= 1"));
    }
    let std: Vec<f64> = sigma.iter().map(|s| s.sqrt()).collect();
    let t = noise.len() as f64;
    let mut total = 0.0;
    let mut d_logits = vec![0.0; c];
    let mut d_sigma = vec![0.0; sigma.len()];
    let mut perturbed = vec![0.0; c];
    for eps in noise {
        if eps.len() != c {
            return Err(Error::shape(format!("noise row has {} entries for {c} logits", eps.len())));
        }
        for k in 0..c {
            perturbed[k] = logits[k] + sigma_at(&std, k) * eps[k];
        }
        let q = softmax_unchecked(&perturbed);
        total += -q[target].max(LOG_FLOOR).ln();
        if want_grad {
            let g = l1_grad_logits(&q, target);
            for k in 0..c {
                d_logits[k] += g[k] / t;
                let sd = sigma_at(&std, k);
                // d(√σ)/dσ = 1 / (2√σ); σ = 0 only occurs on softplus underflow.
                if sd > 0.0 {
                    let idx = if sigma.len() == 1 { 0 } else { k };
                    d_sigma[idx] += g[k] * eps[k] / (2.0 * sd) / t;
                }
            }
        }
    }
    Ok((total / t, d_logits, d_sigma))
}

pub fn total_loss(l1: f64, l2: f64, w1: f64, w2: f64) -> f64 {
    w1 * l1 + w2 * l2
}
