//! Feed-forward networks with hand-written reverse-mode gradients.
//!
//! Hidden layers use ReLU followed by inverted dropout; the output layer is
//! linear. Weights are stored `fan_in x fan_out` so a batch forward is a
//! row-major `X · W + b`.

use std::hash::{Hash, Hasher};

use super::matrix::RealMatrix;
use super::rng::SeededRng;
use super::Tensors;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Dropout active, masks drawn from the supplied rng.
    Train,
    /// No dropout; deterministic.
    Eval,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    layer_sizes: Vec<usize>,
    pub weights: Vec<RealMatrix>,
    pub biases: Vec<Vec<f64>>,
    dropout_rate: f64,
}

/// Activations recorded by a forward pass; consumed by [`MlpParams::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layer_sizes: Vec<usize>,
    dropout_rate: f64,
    /// Input to each layer (post activation and dropout for hidden layers).
    inputs: Vec<RealMatrix>,
}

impl ForwardCache {
    pub fn batch_size(&self) -> usize {
        self.inputs[0].rows()
    }
}

/// Gradients shaped like an [`MlpParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradBundle {
    pub weights: Vec<RealMatrix>,
    pub biases: Vec<Vec<f64>>,
}

impl GradBundle {
    pub fn zeros_like(params: &MlpParams) -> Self {
        Self {
            weights: params
                .weights
                .iter()
                .map(|w| RealMatrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: params.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Accumulates `scale * other` into `self`.
    pub fn add_scaled(&mut self, other: &GradBundle, scale: f64) {
        for (a, b) in self.tensors_mut().into_iter().zip(other.tensors()) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += scale * y;
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|&v| v == 0.0))
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|t| t.iter().all(|v| v.is_finite()))
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors().concat()
    }
}

impl Tensors for GradBundle {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(self.weights.len() * 2);
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.as_slice());
            out.push(b.as_slice());
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(self.weights.len() * 2);
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            out.push(w.as_mut_slice());
            out.push(b.as_mut_slice());
        }
        out
    }
}

impl Tensors for MlpParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(self.weights.len() * 2);
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.push(w.as_slice());
            out.push(b.as_slice());
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(self.weights.len() * 2);
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            out.push(w.as_mut_slice());
            out.push(b.as_mut_slice());
        }
        out
    }
}

impl MlpParams {
    /// All-zero network.
    pub fn zeros(layer_sizes: &[usize], dropout_rate: f64) -> Result<Self> {
        Self::validate_layout(layer_sizes, dropout_rate)?;
        let weights = layer_sizes
            .windows(2)
            .map(|w| RealMatrix::zeros(w[0], w[1]))
            .collect();
        let biases = layer_sizes[1..].iter().map(|&n| vec![0.0; n]).collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            dropout_rate,
        })
    }

    /// Uniform fan-in initialisation `U(-1/sqrt(fan_in), 1/sqrt(fan_in))` for
    /// weights and biases, the usual default for dense layers.
    pub fn init(layer_sizes: &[usize], dropout_rate: f64, rng: &mut SeededRng) -> Result<Self> {
        let mut p = Self::zeros(layer_sizes, dropout_rate)?;
        for (w, b) in p.weights.iter_mut().zip(p.biases.iter_mut()) {
            let bound = 1.0 / (w.rows() as f64).sqrt();
            for v in w.as_mut_slice() {
                *v = rng.uniform_in(-bound, bound);
            }
            for v in b.iter_mut() {
                *v = rng.uniform_in(-bound, bound);
            }
        }
        Ok(p)
    }

    fn validate_layout(layer_sizes: &[usize], dropout_rate: f64) -> Result<()> {
        if layer_sizes.len() < 2 || layer_sizes.contains(&0) {
            return Err(Error::shape(format!(
                "invalid layer sizes {layer_sizes:?}: need at least input and output, all non-zero"
            )));
        }
        if !(0.0..1.0).contains(&dropout_rate) {
            return Err(Error::contract(format!(
                "dropout rate {dropout_rate} outside [0, 1)"
            )));
        }
        Ok(())
    }

    /// Rebuilds a network from explicit tensors, checking that shapes chain.
    pub fn from_parts(
        layer_sizes: Vec<usize>,
        weights: Vec<RealMatrix>,
        biases: Vec<Vec<f64>>,
        dropout_rate: f64,
    ) -> Result<Self> {
        Self::validate_layout(&layer_sizes, dropout_rate)?;
        let n = layer_sizes.len() - 1;
        if weights.len() != n || biases.len() != n {
            return Err(Error::shape("layer count does not match layer sizes"));
        }
        for l in 0..n {
            if weights[l].shape() != (layer_sizes[l], layer_sizes[l + 1])
                || biases[l].len() != layer_sizes[l + 1]
            {
                return Err(Error::shape(format!("layer {l} does not chain")));
            }
        }
        let p = Self {
            layer_sizes,
            weights,
            biases,
            dropout_rate,
        };
        if !p.tensors().iter().all(|t| t.iter().all(|v| v.is_finite())) {
            return Err(Error::numeric("non-finite parameter"));
        }
        Ok(p)
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn dropout_rate(&self) -> f64 {
        self.dropout_rate
    }

    pub fn set_dropout_rate(&mut self, rate: f64) -> Result<()> {
        Self::validate_layout(&self.layer_sizes, rate)?;
        self.dropout_rate = rate;
        Ok(())
    }

    /// Multiplies the output layer's weights and bias by `factor`.
    pub fn scale_output_layer(&mut self, factor: f64) {
        let last = self.weights.len() - 1;
        for v in self.weights[last].as_mut_slice() {
            *v *= factor;
        }
        for v in &mut self.biases[last] {
            *v *= factor;
        }
    }

    pub fn num_params(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// Hash over the exact bit patterns of every parameter.
    pub fn fingerprint(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.layer_sizes.hash(&mut h);
        for t in self.tensors() {
            for v in t {
                v.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }

    /// Batched forward pass. Rows of `input` are samples.
    pub fn forward(
        &self,
        input: &RealMatrix,
        mode: Mode,
        rng: &mut SeededRng,
    ) -> Result<(RealMatrix, ForwardCache)> {
        self.run(input, mode, Some(rng))
    }

    /// Eval-mode forward that also returns the cache (no rng needed).
    pub fn forward_eval(&self, input: &RealMatrix) -> Result<(RealMatrix, ForwardCache)> {
        self.run(input, Mode::Eval, None)
    }

    /// Eval-mode forward without keeping activations.
    pub fn predict(&self, input: &RealMatrix) -> Result<RealMatrix> {
        self.run(input, Mode::Eval, None).map(|(out, _)| out)
    }

    /// Single-sample eval-mode forward.
    pub fn predict_one(&self, input: &[f64]) -> Result<Vec<f64>> {
        let x = RealMatrix::from_vec(1, input.len(), input.to_vec())?;
        Ok(self.predict(&x)?.into_vec())
    }

    fn run(
        &self,
        input: &RealMatrix,
        mode: Mode,
        mut rng: Option<&mut SeededRng>,
    ) -> Result<(RealMatrix, ForwardCache)> {
        if input.cols() != self.input_dim() {
            return Err(Error::shape(format!(
                "network expects input of width {}, got {}",
                self.input_dim(),
                input.cols()
            )));
        }
        if !input.is_finite() {
            return Err(Error::numeric("non-finite network input"));
        }
        let drop = mode == Mode::Train && self.dropout_rate > 0.0;
        if drop && rng.is_none() {
            return Err(Error::contract("train-mode dropout needs an rng"));
        }
        let keep_scale = 1.0 / (1.0 - self.dropout_rate);
        let n_layers = self.weights.len();
        let mut inputs = Vec::with_capacity(n_layers);
        let mut x = input.clone();
        for l in 0..n_layers {
            let mut z = affine(&x, &self.weights[l], &self.biases[l]);
            if l + 1 < n_layers {
                for v in z.as_mut_slice() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
                if drop {
                    let r = rng.as_deref_mut().expect("checked above");
                    for v in z.as_mut_slice() {
                        if r.uniform() < self.dropout_rate {
                            *v = 0.0;
                        } else {
                            *v *= keep_scale;
                        }
                    }
                }
            }
            inputs.push(x);
            x = z;
        }
        let cache = ForwardCache {
            layer_sizes: self.layer_sizes.clone(),
            dropout_rate: if drop { self.dropout_rate } else { 0.0 },
            inputs,
        };
        Ok((x, cache))
    }

    /// Reverse-mode pass: gradients of `sum(output ⊙ output_grad)` with
    /// respect to every parameter and to the input.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        output_grad: &RealMatrix,
    ) -> Result<(GradBundle, RealMatrix)> {
        let (g, dx) = self.backprop(cache, output_grad, true)?;
        Ok((g.expect("param grads requested"), dx))
    }

    /// Like [`backward`](Self::backward) but skips parameter gradients.
    pub fn input_grad(&self, cache: &ForwardCache, output_grad: &RealMatrix) -> Result<RealMatrix> {
        self.backprop(cache, output_grad, false).map(|(_, dx)| dx)
    }

    fn backprop(
        &self,
        cache: &ForwardCache,
        output_grad: &RealMatrix,
        want_params: bool,
    ) -> Result<(Option<GradBundle>, RealMatrix)> {
        if cache.layer_sizes != self.layer_sizes || cache.inputs.len() != self.weights.len() {
            return Err(Error::contract(
                "forward cache was produced by a different network",
            ));
        }
        let batch = cache.batch_size();
        if output_grad.shape() != (batch, self.output_dim()) {
            return Err(Error::shape(format!(
                "output gradient is {:?}, expected ({batch}, {})",
                output_grad.shape(),
                self.output_dim()
            )));
        }
        let keep_scale = 1.0 / (1.0 - cache.dropout_rate);
        let mut grads = want_params.then(|| GradBundle::zeros_like(self));
        let mut dz = output_grad.clone();
        for l in (0..self.weights.len()).rev() {
            let x = &cache.inputs[l];
            let w = &self.weights[l];
            if let Some(g) = grads.as_mut() {
                let gw = g.weights[l].as_mut_slice();
                let out = w.cols();
                for b in 0..batch {
                    let dz_row = dz.row(b);
                    for (k, &a) in x.row(b).iter().enumerate() {
                        if a == 0.0 {
                            continue;
                        }
                        for (gv, &d) in gw[k * out..(k + 1) * out].iter_mut().zip(dz_row) {
                            *gv += a * d;
                        }
                    }
                    for (gb, &d) in g.biases[l].iter_mut().zip(dz_row) {
                        *gb += d;
                    }
                }
            }
            let mut dx = RealMatrix::zeros(batch, w.rows());
            for b in 0..batch {
                let dz_row = dz.row(b);
                let x_row = x.row(b);
                let dx_row = dx.row_mut(b);
                for k in 0..w.rows() {
                    // Hidden inputs are relu(z)·mask/(1-p): derivative is the
                    // keep scale wherever the stored value is positive.
                    if l > 0 && x_row[k] <= 0.0 {
                        continue;
                    }
                    let s: f64 = w.row(k).iter().zip(dz_row).map(|(a, b)| a * b).sum();
                    dx_row[k] = if l > 0 { s * keep_scale } else { s };
                }
            }
            dz = dx;
        }
        Ok((grads, dz))
    }
}

fn affine(x: &RealMatrix, w: &RealMatrix, b: &[f64]) -> RealMatrix {
    let out_dim = w.cols();
    let mut z = RealMatrix::zeros(x.rows(), out_dim);
    for i in 0..x.rows() {
        let zr = z.row_mut(i);
        zr.copy_from_slice(b);
        for (k, &a) in x.row(i).iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (o, &wv) in zr.iter_mut().zip(w.row(k)) {
                *o += a * wv;
            }
        }
    }
    z
}
