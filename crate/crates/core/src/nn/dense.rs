use serde::{Deserialize, Serialize};

use super::activation::relu;
use super::rng::RngState;
use super::tensor::Matrix;
use super::Parameters;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

/// Fully connected layer `y = act(W x + b)`. The bias is stored as an
/// `out × 1` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Matrix,
    pub bias: Matrix,
}

/// Values kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct DenseCache {
    input: Vec<f64>,
    pre_activation: Vec<f64>,
    activation: Activation,
}

impl Dense {
    pub fn zeros(input_dim: usize, output_dim: usize) -> Self {
        Dense {
            weight: Matrix::zeros(output_dim, input_dim),
            bias: Matrix::zeros(output_dim, 1),
        }
    }

    /// Glorot-uniform weights, zero bias.
    pub fn glorot(input_dim: usize, output_dim: usize, rng: &mut RngState) -> Self {
        let limit = (6.0 / (input_dim + output_dim) as f64).sqrt();
        Dense {
            weight: Matrix::from_fn(output_dim, input_dim, |_, _| rng.uniform_range(-limit, limit)),
            bias: Matrix::zeros(output_dim, 1),
        }
    }

    pub fn from_parts(weight: Matrix, bias: Vec<f64>) -> Result<Self> {
        if bias.len() != weight.rows() {
            return Err(Error::shape(format!(
                "bias length {} does not match {} output rows",
                bias.len(),
                weight.rows()
            )));
        }
        let n = bias.len();
        Ok(Dense { weight, bias: Matrix::from_vec(n, 1, bias)? })
    }

    pub fn input_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows()
    }

    pub fn forward(&self, input: &[f64], activation: Activation) -> Result<Vec<f64>> {
        Ok(self.forward_cached(input, activation)?.0)
    }

    pub fn forward_cached(&self, input: &[f64], activation: Activation) -> Result<(Vec<f64>, DenseCache)> {
        let mut pre = self.weight.matvec(input)?;
        for (z, b) in pre.iter_mut().zip(self.bias.data()) {
            *z += b;
        }
        let out = match activation {
            Activation::Relu => pre.iter().map(|&z| relu(z)).collect(),
            Activation::Linear => pre.clone(),
        };
        let cache = DenseCache { input: input.to_vec(), pre_activation: pre, activation };
        Ok((out, cache))
    }

    /// Accumulates parameter gradients into `grad` and returns the gradient
    /// with respect to the input.
    pub fn backward(&self, cache: &DenseCache, d_output: &[f64], grad: &mut Dense) -> Vec<f64> {
        let d_pre: Vec<f64> = match cache.activation {
            Activation::Linear => d_output.to_vec(),
            Activation::Relu => d_output
                .iter()
                .zip(&cache.pre_activation)
                .map(|(d, &z)| if z > 0.0 { *d } else { 0.0 })
                .collect(),
        };
        grad.weight.add_outer(&d_pre, &cache.input);
        for (b, d) in grad.bias.data_mut().iter_mut().zip(&d_pre) {
            *b += d;
        }
        let mut d_input = vec![0.0; self.input_dim()];
        self.weight.matvec_t_acc(&d_pre, &mut d_input);
        d_input
    }
}

impl Parameters for Dense {
    fn tensors(&self) -> Vec<(String, &Matrix)> {
        vec![("weight".into(), &self.weight), ("bias".into(), &self.bias)]
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        vec![("weight".into(), &mut self.weight), ("bias".into(), &mut self.bias)]
    }
}

/// Stand-alone form of [`Dense::forward`].
pub fn dense_forward(weight: &Matrix, bias: &[f64], input: &[f64], activation: Activation) -> Result<Vec<f64>> {
    Dense::from_parts(weight.clone(), bias.to_vec())?.forward(input, activation)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_relu_clamps() {
        let out = dense_forward(&Matrix::identity(2), &[0.0, 0.0], &[-1.0, 2.0], Activation::Relu).unwrap();
        assert_eq!(out, vec![0.0, 2.0]);
    }

    #[test]
    fn zero_weights_give_bias() {
        let out = dense_forward(&Matrix::zeros(3, 2), &[0.5, -1.0, 2.0], &[4.0, 5.0], Activation::Linear).unwrap();
        assert_eq!(out, vec![0.5, -1.0, 2.0]);
    }

    #[test]
    fn scalar_loop_oracle() {
        let mut rng = RngState::new(5);
        for _ in 0..20 {
            let layer = Dense::from_parts(
                Matrix::from_fn(4, 6, |_, _| rng.uniform_range(-1.0, 1.0)),
                (0..4).map(|_| rng.uniform_range(-1.0, 1.0)).collect(),
            )
            .unwrap();
            let x: Vec<f64> = (0..6).map(|_| rng.uniform_range(-2.0, 2.0)).collect();
            let got = layer.forward(&x, Activation::Relu).unwrap();
            for r in 0..4 {
                let mut acc = layer.bias.get(r, 0);
                for c in 0..6 {
                    acc += layer.weight.get(r, c) * x[c];
                }
                let want = if acc > 0.0 { acc } else { 0.0 };
                assert!((got[r] - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn shape_error() {
        let layer = Dense::zeros(3, 2);
        assert!(matches!(layer.forward(&[1.0, 2.0], Activation::Linear), Err(Error::Shape(_))));
        assert!(Dense::from_parts(Matrix::zeros(2, 2), vec![0.0; 3]).is_err());
    }

    #[test]
    fn sum_loss_gives_unit_bias_gradients() {
        // loss = sum of outputs of a linear layer on an all-ones input
        let mut rng = RngState::new(9);
        let layer = Dense::glorot(3, 4, &mut rng);
        let (_, cache) = layer.forward_cached(&[1.0; 3], Activation::Linear).unwrap();
        let mut grad = Dense::zeros(3, 4);
        layer.backward(&cache, &[1.0; 4], &mut grad);
        assert!(grad.weight.data().iter().all(|&g| g == 1.0));
        assert!(grad.bias.data().iter().all(|&g| g == 1.0));

        let mut grad = Dense::zeros(3, 4);
        let dx = layer.backward(&cache, &[0.0; 4], &mut grad);
        assert!(grad.weight.data().iter().all(|&g| g == 0.0));
        assert!(dx.iter().all(|&g| g == 0.0));
    }
}
