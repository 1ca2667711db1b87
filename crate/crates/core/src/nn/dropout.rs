use serde::{Deserialize, Serialize};

use super::rng::RngState;
use crate::error::{Error, Result};

/// Dropout configuration for one forward pass.
///
/// Inverted dropout: surviving units are scaled by `1/(1-rate)` so the
/// expected output equals the no-dropout output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DropoutSpec {
    pub rate: f64,
    pub active: bool,
}

impl DropoutSpec {
    pub fn new(rate: f64, active: bool) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::config(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(DropoutSpec { rate, active })
    }

    pub fn off() -> Self {
        DropoutSpec { rate: 0.0, active: false }
    }

    pub fn active(rate: f64) -> Result<Self> {
        Self::new(rate, true)
    }

    pub fn is_identity(&self) -> bool {
        !self.active || self.rate == 0.0
    }

    /// Draws a mask of `len` multipliers, or `None` when the layer is the
    /// identity. No random numbers are consumed in the identity case.
    pub fn sample_mask(&self, len: usize, rng: &mut RngState) -> Option<Vec<f64>> {
        if self.is_identity() {
            return None;
        }
        let keep = 1.0 - self.rate;
        let scale = 1.0 / keep;
        Some(
            (0..len)
                .map(|_| if rng.uniform() < self.rate { 0.0 } else { scale })
                .collect(),
        )
    }
}

pub(crate) fn apply_mask(values: &mut [f64], mask: Option<&Vec<f64>>) {
    if let Some(m) = mask {
        for (v, k) in values.iter_mut().zip(m) {
            *v *= k;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_rate_one() {
        assert!(DropoutSpec::new(1.0, true).is_err());
        assert!(DropoutSpec::new(-0.1, true).is_err());
    }

    #[test]
    fn inactive_is_identity() {
        let mut rng = RngState::new(1);
        let before = rng.position();
        assert!(DropoutSpec::new(0.5, false).unwrap().sample_mask(8, &mut rng).is_none());
        assert!(DropoutSpec::active(0.0).unwrap().sample_mask(8, &mut rng).is_none());
        assert_eq!(rng.position(), before);
    }

    #[test]
    fn zeroed_fraction_and_expectation() {
        for rate in [0.1, 0.3, 0.5] {
            let mut rng = RngState::new(42);
            let mask = DropoutSpec::active(rate).unwrap().sample_mask(10_000, &mut rng).unwrap();
            let zeros = mask.iter().filter(|&&m| m == 0.0).count() as f64 / 10_000.0;
            assert!((zeros - rate).abs() <= 0.02, "rate {rate}: zeroed {zeros}");
            let mean = mask.iter().sum::<f64>() / 10_000.0;
            assert!((mean - 1.0).abs() < 0.05);
            for m in &mask {
                assert!(*m == 0.0 || (*m - 1.0 / (1.0 - rate)).abs() < 1e-15);
            }
        }
    }
}
