use super::activation::sigmoid;
use super::dropout::{apply_mask, DropoutSpec};
use super::rng::RngState;
use super::tensor::Matrix;
use super::Parameters;
use crate::error::{Error, Result};

/// Single-layer LSTM. Gate rows are stacked in the order input, forget,
/// candidate, output; each block is `hidden` rows tall.
///
/// Dropout, when active, masks the emitted hidden state of every step. The
/// recurrence always sees the unmasked state.
#[derive(Debug, Clone, PartialEq)]
pub struct Lstm {
    pub w_input: Matrix,
    pub w_hidden: Matrix,
    pub bias: Matrix,
}

#[derive(Debug, Clone)]
struct StepCache {
    input: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    g: Vec<f64>,
    o: Vec<f64>,
    tanh_c: Vec<f64>,
    mask: Option<Vec<f64>>,
}

/// Execution record of [`Lstm::forward`].
#[derive(Debug, Clone)]
pub struct LstmTrace {
    steps: Vec<StepCache>,
    outputs: Vec<Vec<f64>>,
}

impl LstmTrace {
    /// One (possibly masked) hidden state per time step.
    pub fn outputs(&self) -> &[Vec<f64>] {
        &self.outputs
    }

    pub fn last_output(&self) -> &[f64] {
        self.outputs.last().expect("non-empty sequence")
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }
}

impl Lstm {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Lstm {
            w_input: Matrix::zeros(4 * hidden, input_dim),
            w_hidden: Matrix::zeros(4 * hidden, hidden),
            bias: Matrix::zeros(4 * hidden, 1),
        }
    }

    /// Glorot-uniform weights with the forget-gate bias set to 1.
    pub fn glorot(input_dim: usize, hidden: usize, rng: &mut RngState) -> Self {
        let li = (6.0 / (input_dim + hidden) as f64).sqrt();
        let lh = (6.0 / (2 * hidden) as f64).sqrt();
        let w_input = Matrix::from_fn(4 * hidden, input_dim, |_, _| rng.uniform_range(-li, li));
        let w_hidden = Matrix::from_fn(4 * hidden, hidden, |_, _| rng.uniform_range(-lh, lh));
        let bias = Matrix::from_fn(4 * hidden, 1, |r, _| if (hidden..2 * hidden).contains(&r) { 1.0 } else { 0.0 });
        Lstm { w_input, w_hidden, bias }
    }

    pub fn input_dim(&self) -> usize {
        self.w_input.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_hidden.cols()
    }

    pub fn forward(&self, inputs: &[Vec<f64>], dropout: DropoutSpec, rng: &mut RngState) -> Result<LstmTrace> {
        if inputs.is_empty() {
            return Err(Error::InvalidInput("LSTM input sequence is empty".into()));
        }
        let d = self.input_dim();
        let h = self.hidden_dim();
        if let Some((t, x)) = inputs.iter().enumerate().find(|(_, x)| x.len() != d) {
            return Err(Error::shape(format!("LSTM step {t}: expected input dim {d}, got {}", x.len())));
        }
        let mut h_prev = vec![0.0; h];
        let mut c_prev = vec![0.0; h];
        let mut steps = Vec::with_capacity(inputs.len());
        let mut outputs = Vec::with_capacity(inputs.len());
        for x in inputs {
            let mut a = self.w_input.matvec(x)?;
            let ah = self.w_hidden.matvec(&h_prev)?;
            for ((a, r), b) in a.iter_mut().zip(&ah).zip(self.bias.data()) {
                *a += r + b;
            }
            let i: Vec<f64> = a[..h].iter().map(|&z| sigmoid(z)).collect();
            let f: Vec<f64> = a[h..2 * h].iter().map(|&z| sigmoid(z)).collect();
            let g: Vec<f64> = a[2 * h..3 * h].iter().map(|&z| z.tanh()).collect();
            let o: Vec<f64> = a[3 * h..].iter().map(|&z| sigmoid(z)).collect();
            let c: Vec<f64> = (0..h).map(|k| f[k] * c_prev[k] + i[k] * g[k]).collect();
            let tanh_c: Vec<f64> = c.iter().map(|v| v.tanh()).collect();
            let hidden: Vec<f64> = (0..h).map(|k| o[k] * tanh_c[k]).collect();
            let mask = dropout.sample_mask(h, rng);
            let mut out = hidden.clone();
            apply_mask(&mut out, mask.as_ref());
            steps.push(StepCache {
                input: x.clone(),
                h_prev: std::mem::replace(&mut h_prev, hidden),
                c_prev: std::mem::replace(&mut c_prev, c),
                i,
                f,
                g,
                o,
                tanh_c,
                mask,
            });
            outputs.push(out);
        }
        Ok(LstmTrace { steps, outputs })
    }

    /// Backpropagation through time. `d_outputs[t]` is the loss gradient with
    /// respect to the emitted output of step `t` (an empty vector means zero).
    /// Parameter gradients are accumulated into `grad`; input gradients are
    /// returned per step.
    pub fn backward(&self, trace: &LstmTrace, d_outputs: &[Vec<f64>], grad: &mut Lstm) -> Result<Vec<Vec<f64>>> {
        if d_outputs.len() != trace.len() {
            return Err(Error::shape(format!(
                "LSTM backward: {} output gradients for {} steps",
                d_outputs.len(),
                trace.len()
            )));
        }
        let h = self.hidden_dim();
        let mut dh_next = vec![0.0; h];
        let mut dc_next = vec![0.0; h];
        let mut d_inputs = vec![Vec::new(); trace.len()];
        let mut da = vec![0.0; 4 * h];
        for (t, step) in trace.steps.iter().enumerate().rev() {
            let mut dh = dh_next.clone();
            let d_out = &d_outputs[t];
            if !d_out.is_empty() {
                for k in 0..h {
                    let m = step.mask.as_ref().map_or(1.0, |m| m[k]);
                    dh[k] += d_out[k] * m;
                }
            }
            for k in 0..h {
                let (i, f, g, o, tc) = (step.i[k], step.f[k], step.g[k], step.o[k], step.tanh_c[k]);
                let d_o = dh[k] * tc;
                let dc = dh[k] * o * (1.0 - tc * tc) + dc_next[k];
                da[k] = dc * g * i * (1.0 - i);
                da[h + k] = dc * step.c_prev[k] * f * (1.0 - f);
                da[2 * h + k] = dc * i * (1.0 - g * g);
                da[3 * h + k] = d_o * o * (1.0 - o);
                dc_next[k] = dc * f;
            }
            grad.w_input.add_outer(&da, &step.input);
            grad.w_hidden.add_outer(&da, &step.h_prev);
            for (b, d) in grad.bias.data_mut().iter_mut().zip(&da) {
                *b += d;
            }
            let mut dx = vec![0.0; self.input_dim()];
            self.w_input.matvec_t_acc(&da, &mut dx);
            d_inputs[t] = dx;
            dh_next.iter_mut().for_each(|v| *v = 0.0);
            self.w_hidden.matvec_t_acc(&da, &mut dh_next);
        }
        Ok(d_inputs)
    }
}

impl Parameters for Lstm {
    fn tensors(&self) -> Vec<(String, &Matrix)> {
        vec![
            ("w_input".into(), &self.w_input),
            ("w_hidden".into(), &self.w_hidden),
            ("bias".into(), &self.bias),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<(String, &mut Matrix)> {
        vec![
            ("w_input".into(), &mut self.w_input),
            ("w_hidden".into(), &mut self.w_hidden),
            ("bias".into(), &mut self.bias),
        ]
    }
}
