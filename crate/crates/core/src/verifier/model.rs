use serde::{Deserialize, Serialize};

use super::loss::{l1_grad_logits, l2_value_and_grad, loss_l1, total_loss};
use crate::error::{Error, Result};
use crate::nn::{
    apply_mask, prefixed, prefixed_mut, sigmoid, softmax_unchecked, softplus, Activation, Checkpoint, Dense,
    DenseCache, DropoutSpec, Lstm, LstmTrace, Matrix, Parameters, RngState,
};

/// Whether the variance head emits one σ per branch or one per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    #[default]
    Scalar,
    PerClass,
}

/// Layer sizes of the branch-LSTM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    pub hidden_size: usize,
    pub num_relu_layers: usize,
    pub n_classes: usize,
    pub variance_mode: VarianceMode,
}

/// All weights of the classifier: LSTM, ReLU stack, logit head `W_v, b_v`
/// and variance head `W_σ, b_σ`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub lstm: Lstm,
    pub relu: Vec<Dense>,
    pub logits: Dense,
    pub variance: Dense,
}

/// Outputs for one branch. `sigma` has one entry in scalar mode and
/// `n_classes` entries in per-class mode.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchOutput {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    pub sigma: Vec<f64>,
    pub p: Vec<f64>,
}

impl BranchOutput {
    /// The branch's aleatoric score (mean σ over entries).
    pub fn sigma_score(&self) -> f64 {
        self.sigma.iter().sum::<f64>() / self.sigma.len() as f64
    }
}

/// Execution record of a branch forward pass, consumed by the backward pass.
#[derive(Debug, Clone)]
pub struct BranchTrace {
    lstm: LstmTrace,
    relu: Vec<(DenseCache, Option<Vec<f64>>)>,
    logits: DenseCache,
    variance: DenseCache,
    variance_pre: Vec<f64>,
    pub output: BranchOutput,
}

/// Losses of one branch along with the recorded noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BranchLoss {
    pub total: f64,
    pub l1: f64,
    pub l2: f64,
}

/// Small positive start for ReLU biases so units begin active.
pub const RELU_BIAS_INIT: f64 = 0.1;

impl ModelParams {
    pub fn init(arch: Architecture, rng: &mut RngState) -> Result<Self> {
        if arch.n_classes < 2 {
            return Err(Error::config(format!("need at least 2 classes, got {}", arch.n_classes)));
        }
        if arch.hidden_size == 0 || arch.input_dim == 0 {
            return Err(Error::config("input and hidden sizes must be positive"));
        }
        let h = arch.hidden_size;
        let lstm = Lstm::glorot(arch.input_dim, h, rng);
        let relu = (0..arch.num_relu_layers)
            .map(|_| {
                let mut layer = Dense::glorot(h, h, rng);
                layer.bias.fill(RELU_BIAS_INIT);
                layer
            })
            .collect();
        let logits = Dense::glorot(h, arch.n_classes, rng);
        let var_out = match arch.variance_mode {
            VarianceMode::Scalar => 1,
            VarianceMode::PerClass => arch.n_classes,
        };
        let variance = Dense::glorot(h, var_out, rng);
        Ok(ModelParams { lstm, relu, logits, variance })
    }

    /// All-zero parameters with the given layout; also used as a gradient
    /// accumulator.
    pub fn zeros(arch: Architecture) -> Self {
        let h = arch.hidden_size;
        ModelParams {
            lstm: Lstm::zeros(arch.input_dim, h),
            relu: (0..arch.num_relu_layers).map(|_| Dense::zeros(h, h)).collect(),
            logits: Dense::zeros(h, arch.n_classes),
            variance: Dense::zeros(
                h,
                match arch.variance_mode {
                    VarianceMode::Scalar => 1,
                    VarianceMode::PerClass => arch.n_classes,
                },
            ),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.architecture())
    }

    pub fn architecture(&self) -> Architecture {
        Architecture {
            input_dim: self.lstm.input_dim(),
            hidden_size: self.lstm.hidden_dim(),
            num_relu_layers: self.relu.len(),
            n_classes: self.n_classes(),
            variance_mode: self.variance_mode(),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.logits.output_dim()
    }

    pub fn input_dim(&self) -> usize {
        self.lstm.input_dim()
    }

    pub fn variance_mode(&self) -> VarianceMode {
        if self.variance.output_dim() == 1 {
            VarianceMode::Scalar
        } else {
            VarianceMode::PerClass
        }
    }

    pub fn forward_branch(&self, inputs: &[Vec<f64>], dropout: DropoutSpec, rng: &mut RngState) -> Result<BranchOutput> {
        Ok(self.forward_trace(inputs, dropout, rng)?.output)
    }

    /// Forward pass keeping every intermediate needed by [`Self::backward`].
    pub fn forward_trace(&self, inputs: &[Vec<f64>], dropout: DropoutSpec, rng: &mut RngState) -> Result<BranchTrace> {
        let lstm = self.lstm.forward(inputs, dropout, rng)?;
        let mut u = lstm.last_output().to_vec();
        let mut relu = Vec::with_capacity(self.relu.len());
        for layer in &self.relu {
            let (mut out, cache) = layer.forward_cached(&u, Activation::Relu)?;
            let mask = dropout.sample_mask(out.len(), rng);
            apply_mask(&mut out, mask.as_ref());
            relu.push((cache, mask));
            u = out;
        }
        let (v, logits) = self.logits.forward_cached(&u, Activation::Linear)?;
        let (variance_pre, variance) = self.variance.forward_cached(&u, Activation::Linear)?;
        let sigma = variance_pre.iter().map(|&s| softplus(s)).collect();
        let p = softmax_unchecked(&v);
        Ok(BranchTrace {
            lstm,
            relu,
            logits,
            variance,
            variance_pre,
            output: BranchOutput { u, v, sigma, p },
        })
    }

    /// Backward pass from loss gradients w.r.t. the logits and σ.
    /// Gradients are accumulated into `grads`.
    pub fn backward(&self, trace: &BranchTrace, d_logits: &[f64], d_sigma: &[f64], grads: &mut ModelParams) -> Result<()> {
        if d_logits.len() != self.n_classes() || d_sigma.len() != self.variance.output_dim() {
            return Err(Error::shape("loss gradient does not match head sizes"));
        }
        let d_pre: Vec<f64> = d_sigma
            .iter()
            .zip(&trace.variance_pre)
            .map(|(d, &s)| d * sigmoid(s))
            .collect();
        let mut du = self.logits.backward(&trace.logits, d_logits, &mut grads.logits);
        let du_var = self.variance.backward(&trace.variance, &d_pre, &mut grads.variance);
        for (a, b) in du.iter_mut().zip(&du_var) {
            *a += b;
        }
        for (k, layer) in self.relu.iter().enumerate().rev() {
            let (cache, mask) = &trace.relu[k];
            apply_mask(&mut du, mask.as_ref());
            du = layer.backward(cache, &du, &mut grads.relu[k]);
        }
        let steps = trace.lstm.len();
        let mut d_outputs = vec![Vec::new(); steps];
        d_outputs[steps - 1] = du;
        self.lstm.backward(&trace.lstm, &d_outputs, &mut grads.lstm)?;
        Ok(())
    }

    /// Total loss `w1·l1 + w2·l2` of one branch and its gradient, using the
    /// supplied noise rows for l2. Dropout masks come from `rng`.
    #[allow(clippy::too_many_arguments)]
    pub fn loss_and_grad(
        &self,
        inputs: &[Vec<f64>],
        target: usize,
        noise: &[Vec<f64>],
        w1: f64,
        w2: f64,
        dropout: DropoutSpec,
        rng: &mut RngState,
        grads: &mut ModelParams,
    ) -> Result<BranchLoss> {
        let trace = self.forward_trace(inputs, dropout, rng)?;
        let out = &trace.output;
        let l1 = loss_l1(&out.p, target)?;
        let g1 = l1_grad_logits(&out.p, target);
        let (l2, g2_logits, g2_sigma) = if w2 != 0.0 {
            l2_value_and_grad(&out.v, &out.sigma, target, noise, true)?
        } else {
            (0.0, vec![0.0; out.v.len()], vec![0.0; out.sigma.len()])
        };
        let d_logits: Vec<f64> = g1.iter().zip(&g2_logits).map(|(a, b)| w1 * a + w2 * b).collect();
        let d_sigma: Vec<f64> = g2_sigma.iter().map(|g| w2 * g).collect();
        self.backward(&trace, &d_logits, &d_sigma, grads)?;
        Ok(BranchLoss { total: total_loss(l1, l2, w1, w2), l1, l2 })
    }

    /// Loss only, same conventions as [`Self::loss_and_grad`].
    #[allow(clippy::too_many_arguments)]
    pub fn loss(
        &self,
        inputs: &[Vec<f64>],
        target: usize,
        noise: &[Vec<f64>],
        w1: f64,
        w2: f64,
        dropout: DropoutSpec,
        rng: &mut RngState,
    ) -> Result<BranchLoss> {
        let out = self.forward_branch(inputs, dropout, rng)?;
        let l1 = loss_l1(&out.p, target)?;
        let l2 = if w2 != 0.0 {
            l2_value_and_grad(&out.v, &out.sigma, target, noise, false)?.0
        } else {
            0.0
        };
        Ok(BranchLoss { total: total_loss(l1, l2, w1, w2), l1, l2 })
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint::from_params(self)
    }

    /// Rebuilds parameters from a checkpoint, inferring the layout from
    /// tensor shapes.
    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        let w_input = ck.tensor("lstm.w_input")?;
        let hidden = w_input.rows() / 4;
        let n_relu = (0..).take_while(|k| ck.0.contains_key(&format!("relu.{k}.weight"))).count();
        let n_classes = ck.tensor("logits.weight")?.rows();
        let var_out = ck.tensor("variance.weight")?.rows();
        let variance_mode = if var_out == 1 { VarianceMode::Scalar } else { VarianceMode::PerClass };
        let mut params = ModelParams::zeros(Architecture {
            input_dim: w_input.cols(),
            hidden_size: hidden,
            num_relu_layers: n_relu,
            n_classes,
            variance_mode,
        });
        ck.load_into(&mut params)?;
        Ok(params)
    }
}

impl Parameters for ModelParams {
    fn tensors(&self) -> Vec<(String, &Matrix)> {
        let mut out = prefixed("lstm", self.lstm.tensors());
        for (k, layer) in self.relu.iter().enumerate() {
            out.extend(prefixed(&format!("relu.{k}"), layer.tensors()));
        }
        out.extend(prefixed("logits", self.logits.tensors()));
        out.extend(prefixed("variance", self.variance.tensors()));
        out
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        let mut out = prefixed_mut("lstm", self.lstm.tensors_mut());
        for (k, layer) in self.relu.iter_mut().enumerate() {
            out.extend(prefixed_mut(&format!("relu.{k}"), layer.tensors_mut()));
        }
        out.extend(prefixed_mut("logits", self.logits.tensors_mut()));
        out.extend(prefixed_mut("variance", self.variance.tensors_mut()));
        out
    }
}


/// Stateful forward/backward pairing: a backward call needs a preceding
/// forward call, and consumes its record.
#[derive(Debug)]
pub struct Session<'a> {
    params: &'a ModelParams,
    trace: Option<BranchTrace>,
}

impl<'a> Session<'a> {
    pub fn new(params: &'a ModelParams) -> Self {
        Session { params, trace: None }
    }

    pub fn forward(&mut self, inputs: &[Vec<f64>], dropout: DropoutSpec, rng: &mut RngState) -> Result<&BranchOutput> {
        let trace = self.params.forward_trace(inputs, dropout, rng)?;
        Ok(&self.trace.insert(trace).output)
    }

    /// Gradients of a loss whose derivatives w.r.t. the logits and σ are given.
    pub fn backward(&mut self, d_logits: &[f64], d_sigma: &[f64]) -> Result<ModelParams> {
        let trace = self
            .trace
            .take()
            .ok_or_else(|| Error::State("backward called before forward".into()))?;
        let mut grads = self.params.zeros_like();
        self.params.backward(&trace, d_logits, d_sigma, &mut grads)?;
        Ok(grads)
    }
}
