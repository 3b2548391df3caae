//! Feed-forward network with analytic backpropagation.
//!
//! Parameters live in one flat vector, layer-major. Layer `l` with fan-in `fi` and fan-out
//! `fo` stores its `fi x fo` weight matrix row-major (input index major) followed by `fo`
//! biases, so a batch of row vectors is propagated as `Z = X W + b`.

use ndarray::linalg::general_mat_mul;
use ndarray::{Array2, ArrayView2, ArrayViewMut2, Axis};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Rng, Stream};

pub fn softsign(x: f64) -> f64 {
    x / (1.0 + x.abs())
}

pub fn softsign_derivative(x: f64) -> f64 {
    let d = 1.0 + x.abs();
    1.0 / (d * d)
}

/// `ln(1 + e^x)` without overflow for large `x`.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Derivative of [`softplus`], the logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Inverse of [`softplus`] for `y > 0`.
pub fn softplus_inverse(y: f64) -> f64 {
    if y > 30.0 {
        y + (-(-y).exp_m1()).ln()
    } else {
        y.exp_m1().ln()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Softsign,
    Identity,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Softsign => softsign(x),
            Activation::Identity => x,
        }
    }

    fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Softsign => softsign_derivative(x),
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    layer_sizes: Vec<usize>,
    /// Flat layer-major weights and biases.
    pub values: Vec<f64>,
    pub hidden: Activation,
    pub output: Activation,
}

/// Activation cache of one forward pass over a batch of rows.
#[derive(Debug, Clone)]
pub struct Tape {
    /// Input of every layer; `inputs[0]` is the network input.
    inputs: Vec<Array2<f64>>,
    /// Pre-activations of every layer.
    pre: Vec<Array2<f64>>,
    output: Array2<f64>,
    param_count: usize,
}

impl Tape {
    pub fn output(&self) -> &Array2<f64> {
        &self.output
    }

    pub fn rows(&self) -> usize {
        self.output.nrows()
    }
}

fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 || layer_sizes.iter().any(|&n| n == 0) {
        return Err(Error::InvalidLayers(layer_sizes.to_vec()));
    }
    Ok(())
}

/// Initialize a softsign MLP from a seed; see [`MlpParams::init`].
pub fn mlp_init(layer_sizes: &[usize], seed: u64) -> Result<MlpParams> {
    let mut rng = rng::stream(seed, Stream::Init);
    MlpParams::init(layer_sizes, &mut rng)
}

impl MlpParams {
    pub fn param_count(layer_sizes: &[usize]) -> usize {
        layer_sizes.windows(2).map(|w| (w[0] + 1) * w[1]).sum()
    }

    pub fn zeros(layer_sizes: &[usize]) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            values: vec![0.0; Self::param_count(layer_sizes)],
            hidden: Activation::Softsign,
            output: Activation::Identity,
        })
    }

    pub fn from_values(layer_sizes: &[usize], values: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(layer_sizes)?;
        if values.len() != p.values.len() {
            return Err(Error::Dimension {
                what: "mlp parameters",
                expected: p.values.len(),
                got: values.len(),
            });
        }
        p.values = values;
        Ok(p)
    }

    /// Hidden weights ~ U[-6/sqrt(fi+fo), 6/sqrt(fi+fo)], output weights
    /// ~ U[-0.1/sqrt(fi), 0.1/sqrt(fi)], biases zero.
    pub fn init(layer_sizes: &[usize], rng: &mut Rng) -> Result<Self> {
        let mut p = Self::zeros(layer_sizes)?;
        let n_layers = p.n_layers();
        for l in 0..n_layers {
            let (fi, fo) = (layer_sizes[l], layer_sizes[l + 1]);
            let bound = Self::init_bound(fi, fo, l + 1 == n_layers);
            let (w, _) = p.layer_range(l);
            for x in &mut p.values[w] {
                *x = bound * (2.0 * rng.random::<f64>() - 1.0);
            }
        }
        Ok(p)
    }

    pub fn init_bound(fan_in: usize, fan_out: usize, output_layer: bool) -> f64 {
        if output_layer {
            0.1 / (fan_in as f64).sqrt()
        } else {
            6.0 / ((fan_in + fan_out) as f64).sqrt()
        }
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn input_size(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_size(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Index ranges of the weight matrix and bias vector of layer `l`.
    pub fn layer_range(&self, l: usize) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
        let off: usize = self.layer_sizes[..=l]
            .windows(2)
            .map(|w| (w[0] + 1) * w[1])
            .sum();
        let (fi, fo) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
        (off..off + fi * fo, off + fi * fo..off + (fi + 1) * fo)
    }

    /// Index of weight `(input i, output o)` of layer `l` in the flat vector.
    pub fn weight_index(&self, l: usize, i: usize, o: usize) -> usize {
        let (w, _) = self.layer_range(l);
        w.start + i * self.layer_sizes[l + 1] + o
    }

    pub fn bias_index(&self, l: usize, o: usize) -> usize {
        self.layer_range(l).1.start + o
    }

    fn weights(&self, l: usize) -> ArrayView2<'_, f64> {
        let (w, _) = self.layer_range(l);
        let shape = (self.layer_sizes[l], self.layer_sizes[l + 1]);
        ArrayView2::from_shape(shape, &self.values[w]).expect("layer shape")
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, Tape)> {
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row vector");
        let tape = self.forward_batch(x)?;
        Ok((tape.output.row(0).to_vec(), tape))
    }

    /// Output only, for acting and evaluation.
    pub fn predict(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(input)?.0)
    }

    pub fn forward_batch(&self, inputs: ArrayView2<'_, f64>) -> Result<Tape> {
        if inputs.ncols() != self.input_size() {
            return Err(Error::Dimension {
                what: "mlp input",
                expected: self.input_size(),
                got: inputs.ncols(),
            });
        }
        let rows = inputs.nrows();
        let n_layers = self.n_layers();
        let mut layer_inputs = Vec::with_capacity(n_layers);
        let mut pre = Vec::with_capacity(n_layers);
        let mut a = inputs.to_owned();
        for l in 0..n_layers {
            let fo = self.layer_sizes[l + 1];
            let mut z = Array2::<f64>::zeros((rows, fo));
            general_mat_mul(1.0, &a, &self.weights(l), 0.0, &mut z);
            let (_, b) = self.layer_range(l);
            let bias = &self.values[b];
            let act = if l + 1 == n_layers {
                self.output
            } else {
                self.hidden
            };
            let mut next = z.clone();
            for mut row in next.rows_mut() {
                for (x, &bo) in row.iter_mut().zip(bias) {
                    *x = act.apply(*x + bo);
                }
            }
            for mut row in z.rows_mut() {
                for (x, &bo) in row.iter_mut().zip(bias) {
                    *x += bo;
                }
            }
            layer_inputs.push(a);
            pre.push(z);
            a = next;
        }
        Ok(Tape {
            inputs: layer_inputs,
            pre,
            output: a,
            param_count: self.len(),
        })
    }

    pub fn backward(&self, tape: &Tape, output_grad: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let g = ArrayView2::from_shape((1, output_grad.len()), output_grad).expect("row vector");
        let mut grads = vec![0.0; self.len()];
        let input_grad = self.backward_batch(tape, g, Some(&mut grads))?;
        Ok((grads, input_grad.row(0).to_vec()))
    }

    /// Backpropagate `output_grad` (one row per tape row). Parameter gradients summed over
    /// rows are added into `param_grad` when given; the input gradient is returned.
    pub fn backward_batch(
        &self,
        tape: &Tape,
        output_grad: ArrayView2<'_, f64>,
        mut param_grad: Option<&mut [f64]>,
    ) -> Result<Array2<f64>> {
        if tape.param_count != self.len() || tape.pre.len() != self.n_layers() {
            return Err(Error::Dimension {
                what: "tape parameters",
                expected: self.len(),
                got: tape.param_count,
            });
        }
        if output_grad.dim() != tape.output.dim() {
            return Err(Error::Dimension {
                what: "output gradient",
                expected: tape.output.len(),
                got: output_grad.len(),
            });
        }
        if let Some(g) = param_grad.as_deref() {
            if g.len() != self.len() {
                return Err(Error::Dimension {
                    what: "parameter gradient",
                    expected: self.len(),
                    got: g.len(),
                });
            }
        }
        let n_layers = self.n_layers();
        let mut delta = output_grad.to_owned();
        let out_act = self.output;
        if out_act != Activation::Identity {
            delta.zip_mut_with(&tape.pre[n_layers - 1], |d, &z| *d *= out_act.derivative(z));
        }
        for l in (0..n_layers).rev() {
            if let Some(g) = param_grad.as_deref_mut() {
                let (w, b) = self.layer_range(l);
                let shape = (self.layer_sizes[l], self.layer_sizes[l + 1]);
                let mut gw = ArrayViewMut2::from_shape(shape, &mut g[w]).expect("layer shape");
                general_mat_mul(1.0, &tape.inputs[l].t(), &delta, 1.0, &mut gw);
                let bsum = delta.sum_axis(Axis(0));
                for (gb, s) in g[b].iter_mut().zip(bsum.iter()) {
                    *gb += s;
                }
            }
            let mut prev = Array2::<f64>::zeros((delta.nrows(), self.layer_sizes[l]));
            general_mat_mul(1.0, &delta, &self.weights(l).t(), 0.0, &mut prev);
            if l > 0 {
                let act = self.hidden;
                prev.zip_mut_with(&tape.pre[l - 1], |d, &z| *d *= act.derivative(z));
            }
            delta = prev;
        }
        Ok(delta)
    }
}
