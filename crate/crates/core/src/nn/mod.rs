//! Minimal differentiable building blocks: dense and LSTM layers with
//! hand-derived gradients, stable activations, inverted dropout, plain SGD
//! and a JSON checkpoint format.

mod activation;
mod adam;
pub mod checkpoint;
mod dense;
mod dropout;
pub mod gradcheck;
mod lstm;
mod rng;
mod tensor;

pub use activation::{relu, sigmoid, softmax, softplus};
pub use adam::Adam;
pub(crate) use activation::softmax_unchecked;
pub use checkpoint::Checkpoint;
pub use dense::{dense_forward, Activation, Dense, DenseCache};
pub use dropout::DropoutSpec;
pub(crate) use dropout::apply_mask;
pub use lstm::{Lstm, LstmTrace};
pub use rng::{string_key, RngState};
pub(crate) use rng::splitmix64;
pub use tensor::{argmax, dot, Matrix};

use crate::error::{Error, Result};

/// A collection of named parameter tensors. Gradients use the same type, so
/// a zeroed copy of the parameters doubles as the gradient accumulator.
pub trait Parameters {
    fn tensors(&self) -> Vec<(String, &Matrix)>;
    fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)>;

    fn zero(&mut self) {
        for (_, t) in self.tensors_mut() {
            t.fill(0.0);
        }
    }

    fn num_parameters(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.data().len()).sum()
    }
}

/// `p ← p − lr·g`, elementwise over every tensor.
pub fn sgd_step<P: Parameters>(params: &mut P, grads: &P, learning_rate: f64) -> Result<()> {
    if !(learning_rate >= 0.0) || !learning_rate.is_finite() {
        return Err(Error::config(format!("learning rate {learning_rate} must be finite and non-negative")));
    }
    let grads = grads.tensors();
    let mut targets = params.tensors_mut();
    if grads.len() != targets.len() {
        return Err(Error::shape(format!("{} gradient tensors for {} parameters", grads.len(), targets.len())));
    }
    for ((name, p), (gname, g)) in targets.iter_mut().zip(&grads) {
        if name != gname || p.shape() != g.shape() {
            return Err(Error::shape(format!(
                "gradient {gname} {:?} does not match parameter {name} {:?}",
                g.shape(),
                p.shape()
            )));
        }
    }
    for ((_, p), (_, g)) in targets.iter_mut().zip(&grads) {
        for (w, d) in p.data_mut().iter_mut().zip(g.data()) {
            *w -= learning_rate * d;
        }
    }
    Ok(())
}

pub(crate) fn prefixed<'a>(prefix: &str, items: Vec<(String, &'a Matrix)>) -> Vec<(String, &'a Matrix)> {
    items.into_iter().map(|(n, t)| (format!("{prefix}.{n}"), t)).collect()
}

pub(crate) fn prefixed_mut<'a>(prefix: &str, items: Vec<(String, &'a mut Matrix)>) -> Vec<(String, &'a mut Matrix)> {
    items.into_iter().map(|(n, t)| (format!("{prefix}.{n}"), t)).collect()
}
