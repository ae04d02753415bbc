//! Fully connected tanh networks used as inverse charts.
//!
//! A network is a chain of affine layers; every hidden layer is followed by
//! `tanh` and the output layer is left affine so standardized targets outside
//! `[-1, 1]` are reachable. Inputs and outputs pass through per-feature
//! standardization fitted on the training data.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Identity,
}

/// Affine map `z = W x + b`, then the activation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major `outputs x inputs`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl Layer {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.inputs)
            .zip(&self.bias)
            .map(|(w, b)| {
                let z = w.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b;
                match self.activation {
                    Activation::Tanh => z.tanh(),
                    Activation::Identity => z,
                }
            })
            .collect()
    }

    fn weight_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.outputs, self.inputs, &self.weights)
    }
}

/// Per-feature affine normalization `(x − mean) / scale`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Mean and population standard deviation of each column; zero-variance
    /// columns get scale 1.
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mut mean = vec![0.0; dim];
        for r in rows {
            for (m, v) in mean.iter_mut().zip(r) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 * (1.0 + mean.iter().map(|m| m.abs()).fold(0.0, f64::max)) {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn inverse(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| v * s + m)
            .collect()
    }
}

/// Learned map from a chart's `n`-dimensional embedding back to `R^m`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpInverse {
    pub layers: Vec<Layer>,
    pub input_scaling: Standardizer,
    pub output_scaling: Standardizer,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Architecture {
    pub hidden_layers: usize,
    /// `None` means `max(64, 2m)`.
    pub hidden_width: Option<usize>,
}

impl Default for Architecture {
    fn default() -> Self {
        Architecture {
            hidden_layers: 10,
            hidden_width: None,
        }
    }
}

impl Architecture {
    pub fn width_for(&self, output_dim: usize) -> usize {
        self.hidden_width
            .unwrap_or_else(|| (2 * output_dim).max(64))
    }
}

/// Random network: weights `N(0, 1/fan_in)`, zero biases, identity scaling.
pub fn init_mlp(
    input_dim: usize,
    output_dim: usize,
    arch: Architecture,
    seed: u64,
) -> Result<MlpInverse> {
    let width = arch.width_for(output_dim);
    if input_dim == 0 || output_dim == 0 || width == 0 {
        return Err(Error::InvalidInput(
            "network dimensions must be positive".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dims = vec![input_dim];
    dims.extend(std::iter::repeat_n(width, arch.hidden_layers));
    dims.push(output_dim);
    let last = dims.len() - 2;
    let layers = dims
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let std = 1.0 / (w[0] as f64).sqrt();
            Layer {
                inputs: w[0],
                outputs: w[1],
                weights: (0..w[0] * w[1])
                    .map(|_| std * rng.sample::<f64, _>(StandardNormal))
                    .collect(),
                bias: vec![0.0; w[1]],
                activation: if i == last {
                    Activation::Identity
                } else {
                    Activation::Tanh
                },
            }
        })
        .collect();
    Ok(MlpInverse {
        layers,
        input_scaling: Standardizer::identity(input_dim),
        output_scaling: Standardizer::identity(output_dim),
    })
}

impl MlpInverse {
    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().outputs
    }

    /// Raw network on already-standardized input.
    pub fn forward_standardized(&self, x: &[f64]) -> Vec<f64> {
        self.layers
            .iter()
            .fold(x.to_vec(), |h, layer| layer.apply(&h))
    }

    /// `destandardize(net(standardize(y)))`.
    pub fn predict(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: y.len(),
            });
        }
        let z = self.forward_standardized(&self.input_scaling.forward(y));
        Ok(self.output_scaling.inverse(&z))
    }

    /// Jacobian of [`predict`](Self::predict) at `y`, row-major `m x n`.
    pub fn jacobian(&self, y: &[f64]) -> Result<Vec<f64>> {
        if y.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: y.len(),
            });
        }
        let n = self.input_dim();
        // forward-mode: carry d(activation)/d(input) as an `outputs x n` block
        let mut h = self.input_scaling.forward(y);
        let mut jac = DMatrix::<f64>::from_fn(n, n, |i, j| {
            if i == j {
                1.0 / self.input_scaling.scale[i]
            } else {
                0.0
            }
        });
        for layer in &self.layers {
            let w = layer.weight_matrix();
            let next = layer.apply(&h);
            let mut dz = &w * &jac;
            if layer.activation == Activation::Tanh {
                for (r, a) in next.iter().enumerate() {
                    let d = 1.0 - a * a;
                    dz.row_mut(r).iter_mut().for_each(|v| *v *= d);
                }
            }
            jac = dz;
            h = next;
        }
        for (r, s) in self.output_scaling.scale.iter().enumerate() {
            jac.row_mut(r).iter_mut().for_each(|v| *v *= s);
        }
        Ok(jac.transpose().as_slice().to_vec())
    }

    /// Every hidden layer is affine-then-tanh and the output layer affine, so
    /// the composed map is smooth.
    pub fn is_smooth_chain(&self) -> bool {
        let Some((last, hidden)) = self.layers.split_last() else {
            return false;
        };
        let chained = self.layers.windows(2).all(|w| w[0].outputs == w[1].inputs);
        chained
            && last.activation == Activation::Identity
            && hidden.iter().all(|l| l.activation == Activation::Tanh)
            && self
                .layers
                .iter()
                .all(|l| l.weights.iter().chain(&l.bias).all(|v| v.is_finite()))
    }

    pub fn n_parameters(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Weights then bias, layer by layer.
    pub fn parameters(&self) -> Vec<f64> {
        let mut p = Vec::with_capacity(self.n_parameters());
        for l in &self.layers {
            p.extend_from_slice(&l.weights);
            p.extend_from_slice(&l.bias);
        }
        p
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_parameters() {
            return Err(Error::DimensionMismatch {
                expected: self.n_parameters(),
                actual: params.len(),
            });
        }
        let mut off = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&params[off..off + nw]);
            off += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&params[off..off + nb]);
            off += nb;
        }
        Ok(())
    }

    /// Mean squared error over all entries of a standardized batch and its
    /// gradient with respect to [`parameters`](Self::parameters).
    pub fn loss_and_gradient(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> (f64, Vec<f64>) {
        let x = columns(inputs, self.input_dim());
        let y = columns(targets, self.output_dim());
        let mut work = Workspace::new(self, inputs.len());
        let weights: Vec<DMatrix<f64>> = self.layers.iter().map(Layer::weight_matrix).collect();
        let biases: Vec<Vec<f64>> = self.layers.iter().map(|l| l.bias.clone()).collect();
        let loss = work.forward_backward(&self.layers, &weights, &biases, &x, &y);
        let mut grad = Vec::with_capacity(self.n_parameters());
        for (gw, gb) in work.grad_w.iter().zip(&work.grad_b) {
            grad.extend(gw.transpose().iter().copied());
            grad.extend_from_slice(gb);
        }
        (loss, grad)
    }
}

/// Batch as a `dim x batch` column matrix.
pub(crate) fn columns(rows: &[Vec<f64>], dim: usize) -> DMatrix<f64> {
    DMatrix::from_fn(dim, rows.len(), |i, j| rows[j][i])
}

/// Preallocated activations and gradients for one batch size.
pub(crate) struct Workspace {
    /// `acts[0]` is the input; `acts[l + 1]` the output of layer `l`.
    acts: Vec<DMatrix<f64>>,
    deltas: Vec<DMatrix<f64>>,
    pub(crate) grad_w: Vec<DMatrix<f64>>,
    pub(crate) grad_b: Vec<Vec<f64>>,
}

impl Workspace {
    pub(crate) fn new(net: &MlpInverse, batch: usize) -> Self {
        let mut acts = vec![DMatrix::zeros(net.input_dim(), batch)];
        acts.extend(net.layers.iter().map(|l| DMatrix::zeros(l.outputs, batch)));
        Workspace {
            acts,
            deltas: net
                .layers
                .iter()
                .map(|l| DMatrix::zeros(l.outputs, batch))
                .collect(),
            grad_w: net
                .layers
                .iter()
                .map(|l| DMatrix::zeros(l.outputs, l.inputs))
                .collect(),
            grad_b: net.layers.iter().map(|l| vec![0.0; l.outputs]).collect(),
        }
    }

    /// Forward pass on `x`; returns the network output block.
    pub(crate) fn forward(
        &mut self,
        layers: &[Layer],
        weights: &[DMatrix<f64>],
        biases: &[Vec<f64>],
        x: &DMatrix<f64>,
    ) -> &DMatrix<f64> {
        self.acts[0].copy_from(x);
        for (l, layer) in layers.iter().enumerate() {
            let (before, after) = self.acts.split_at_mut(l + 1);
            let out = &mut after[0];
            out.gemm(1.0, &weights[l], &before[l], 0.0);
            for mut col in out.column_iter_mut() {
                for (v, b) in col.iter_mut().zip(&biases[l]) {
                    *v += b;
                }
            }
            if layer.activation == Activation::Tanh {
                out.apply(|v| *v = v.tanh());
            }
        }
        self.acts.last().unwrap()
    }

    /// Forward and backward pass; fills the gradient buffers and returns the
    /// batch MSE.
    pub(crate) fn forward_backward(
        &mut self,
        layers: &[Layer],
        weights: &[DMatrix<f64>],
        biases: &[Vec<f64>],
        x: &DMatrix<f64>,
        y: &DMatrix<f64>,
    ) -> f64 {
        self.forward(layers, weights, biases, x);
        let last = layers.len() - 1;
        let count = (y.nrows() * y.ncols()) as f64;
        let out = &self.acts[last + 1];
        let delta = &mut self.deltas[last];
        let mut loss = 0.0;
        for ((d, o), t) in delta.iter_mut().zip(out.iter()).zip(y.iter()) {
            let e = o - t;
            loss += e * e;
            *d = 2.0 * e / count;
        }
        if layers[last].activation == Activation::Tanh {
            for (d, a) in delta.iter_mut().zip(out.iter()) {
                *d *= 1.0 - a * a;
            }
        }
        for l in (0..layers.len()).rev() {
            let acts_t = self.acts[l].transpose();
            self.grad_w[l].gemm(1.0, &self.deltas[l], &acts_t, 0.0);
            for (g, row) in self.grad_b[l].iter_mut().zip(self.deltas[l].row_iter()) {
                *g = row.sum();
            }
            if l > 0 {
                let (lower, upper) = self.deltas.split_at_mut(l);
                let prev = &mut lower[l - 1];
                prev.gemm_tr(1.0, &weights[l], &upper[0], 0.0);
                if layers[l - 1].activation == Activation::Tanh {
                    for (d, a) in prev.iter_mut().zip(self.acts[l].iter()) {
                        *d *= 1.0 - a * a;
                    }
                }
            }
        }
        loss / count
    }
}
