//! Parameter checkpoints: one JSON object mapping tensor name to
//! `{shape, values}`. serde_json writes the shortest representation that
//! round-trips each `f64`, so save → load is lossless.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Matrix, Parameters};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub shape: [usize; 2],
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Checkpoint(pub BTreeMap<String, TensorRecord>);

impl Checkpoint {
    pub fn from_params<P: Parameters>(params: &P) -> Self {
        Checkpoint(
            params
                .tensors()
                .into_iter()
                .map(|(name, t)| {
                    (name, TensorRecord { shape: [t.rows(), t.cols()], values: t.data().to_vec() })
                })
                .collect(),
        )
    }

    pub fn tensor(&self, name: &str) -> Result<Matrix> {
        let rec = self
            .0
            .get(name)
            .ok_or_else(|| Error::data(format!("checkpoint has no tensor {name}")))?;
        Matrix::from_vec(rec.shape[0], rec.shape[1], rec.values.clone())
    }

    /// Overwrites every tensor of `params` with the checkpoint values,
    /// checking names and shapes.
    pub fn load_into<P: Parameters>(&self, params: &mut P) -> Result<()> {
        for (name, t) in params.tensors_mut() {
            let m = self.tensor(&name)?;
            if m.shape() != t.shape() {
                return Err(Error::shape(format!("{name}: checkpoint {:?} vs model {:?}", m.shape(), t.shape())));
            }
            *t = m;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{Lstm, RngState};

    #[test]
    fn round_trip_is_bit_exact() {
        let mut rng = RngState::new(99);
        let lstm = Lstm::glorot(7, 5, &mut rng);
        let json = Checkpoint::from_params(&lstm).to_json().unwrap();
        let mut restored = Lstm::zeros(7, 5);
        Checkpoint::from_json(&json).unwrap().load_into(&mut restored).unwrap();
        for ((_, a), (_, b)) in lstm.tensors().iter().zip(restored.tensors().iter()) {
            for (x, y) in a.data().iter().zip(b.data()) {
                assert_eq!(x.to_bits(), y.to_bits());
            }
        }
    }

    #[test]
    fn shape_mismatch_rejected() {
        let ck = Checkpoint::from_params(&Lstm::zeros(3, 2));
        let mut other = Lstm::zeros(3, 4);
        assert!(ck.load_into(&mut other).is_err());
    }
}
