use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::uncertainty::UncertaintyBundle;

/// A scalar read off an [`UncertaintyBundle`] for ranking or calibration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    VariationRatio,
    Entropy,
    Variance,
    Aleatoric,
    Lcs,
    Margin,
    Ratio,
    SoftmaxEntropy,
}

impl Measure {
    pub const ALL: [Measure; 8] = [
        Measure::VariationRatio,
        Measure::Entropy,
        Measure::Variance,
        Measure::Aleatoric,
        Measure::Lcs,
        Measure::Margin,
        Measure::Ratio,
        Measure::SoftmaxEntropy,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Measure::VariationRatio => "variation_ratio",
            Measure::Entropy => "entropy",
            Measure::Variance => "variance",
            Measure::Aleatoric => "aleatoric",
            Measure::Lcs => "lcs",
            Measure::Margin => "margin",
            Measure::Ratio => "ratio",
            Measure::SoftmaxEntropy => "softmax_entropy",
        }
    }

    /// `lcs` and `margin` grow with certainty; the rest grow with doubt.
    pub fn is_confidence(self) -> bool {
        matches!(self, Measure::Lcs | Measure::Margin)
    }

    pub fn raw(self, b: &UncertaintyBundle) -> f64 {
        match self {
            Measure::VariationRatio => b.variation_ratio,
            Measure::Entropy => b.entropy,
            Measure::Variance => b.variance,
            Measure::Aleatoric => b.aleatoric,
            Measure::Lcs => b.softmax_lcs,
            Measure::Margin => b.softmax_margin,
            Measure::Ratio => b.softmax_ratio,
            Measure::SoftmaxEntropy => b.softmax_entropy,
        }
    }

    /// Value oriented so that larger means less certain.
    pub fn uncertainty(self, b: &UncertaintyBundle) -> f64 {
        let v = self.raw(b);
        if self.is_confidence() {
            1.0 - v
        } else {
            v
        }
    }
}

impl fmt::Display for Measure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Measure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let known: Vec<&str> = Self::ALL.iter().map(|m| m.name()).collect();
                Error::config(format!("unknown measure {s:?}; expected one of {}", known.join(", ")))
            })
    }
}
