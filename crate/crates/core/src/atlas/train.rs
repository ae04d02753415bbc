use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mlp::{columns, init_mlp, Architecture, MlpInverse, Standardizer, Workspace};
use crate::dataset::PointCloud;
use crate::embedding::{project, PcaChart};
use crate::error::{Error, Result};
use crate::par::Exec;

/// Mini-batch Adam on mean squared error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainParams {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub architecture: Architecture,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            epochs: 10_000,
            batch_size: 32,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            architecture: Architecture::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedInverse {
    pub net: MlpInverse,
    /// Full-data MSE (standardized units) before the first update.
    pub initial_loss: f64,
    /// Full-data MSE after the last epoch.
    pub final_loss: f64,
    /// Mean mini-batch loss of each epoch.
    pub loss_history: Vec<f64>,
}

/// Trains a network mapping the chart's projections of `points` back to the
/// points themselves.
pub fn train_inverse(
    chart: &PcaChart,
    points: &PointCloud,
    params: &TrainParams,
) -> Result<TrainedInverse> {
    let (inputs, targets) = chart_pairs(chart, points)?;
    fit_network(&inputs, &targets, params)
}

/// Network inputs (chart coordinates) and targets (ambient points), row-aligned.
type Pairs = (Vec<Vec<f64>>, Vec<Vec<f64>>);

pub(crate) fn chart_pairs(chart: &PcaChart, points: &PointCloud) -> Result<Pairs> {
    let inputs = points
        .rows()
        .map(|r| project(chart, r))
        .collect::<Result<Vec<_>>>()?;
    let targets = points.rows().map(<[f64]>::to_vec).collect();
    Ok((inputs, targets))
}

struct Adam {
    m_w: Vec<DMatrix<f64>>,
    v_w: Vec<DMatrix<f64>>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
    step: i32,
}

impl Adam {
    fn new(weights: &[DMatrix<f64>]) -> Self {
        let zeros_w: Vec<DMatrix<f64>> = weights
            .iter()
            .map(|w| DMatrix::zeros(w.nrows(), w.ncols()))
            .collect();
        let zeros_b: Vec<Vec<f64>> = weights.iter().map(|w| vec![0.0; w.nrows()]).collect();
        Adam {
            m_w: zeros_w.clone(),
            v_w: zeros_w,
            m_b: zeros_b.clone(),
            v_b: zeros_b,
            step: 0,
        }
    }

    fn update(
        &mut self,
        p: &TrainParams,
        weights: &mut [DMatrix<f64>],
        biases: &mut [Vec<f64>],
        grad_w: &[DMatrix<f64>],
        grad_b: &[Vec<f64>],
    ) {
        self.step += 1;
        let c1 = 1.0 - p.beta1.powi(self.step);
        let c2 = 1.0 - p.beta2.powi(self.step);
        let lr = p.learning_rate;
        let rule = |theta: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
            *m = p.beta1 * *m + (1.0 - p.beta1) * g;
            *v = p.beta2 * *v + (1.0 - p.beta2) * g * g;
            *theta -= lr * (*m / c1) / ((*v / c2).sqrt() + p.epsilon);
        };
        for l in 0..weights.len() {
            let it = weights[l]
                .iter_mut()
                .zip(grad_w[l].iter())
                .zip(self.m_w[l].iter_mut().zip(self.v_w[l].iter_mut()));
            for ((theta, &g), (m, v)) in it {
                rule(theta, g, m, v);
            }
            let it = biases[l]
                .iter_mut()
                .zip(&grad_b[l])
                .zip(self.m_b[l].iter_mut().zip(self.v_b[l].iter_mut()));
            for ((theta, &g), (m, v)) in it {
                rule(theta, g, m, v);
            }
        }
    }
}

fn mse(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.len() as f64
}

/// Standardizes inputs and targets, then runs Adam for `params.epochs`
/// passes over shuffled mini-batches.
pub(crate) fn fit_network(
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    params: &TrainParams,
) -> Result<TrainedInverse> {
    let n = inputs.len();
    if n == 0 || targets.len() != n {
        return Err(Error::InvalidInput(format!(
            "need matching non-empty inputs and targets, got {n} and {}",
            targets.len()
        )));
    }
    if params.batch_size == 0 {
        return Err(Error::InvalidInput("batch size must be positive".into()));
    }
    let in_dim = inputs[0].len();
    let out_dim = targets[0].len();
    let input_scaling = Standardizer::fit(inputs);
    let output_scaling = Standardizer::fit(targets);
    let xs: Vec<Vec<f64>> = inputs.iter().map(|r| input_scaling.forward(r)).collect();
    let ys: Vec<Vec<f64>> = targets.iter().map(|r| output_scaling.forward(r)).collect();

    let mut net = init_mlp(in_dim, out_dim, params.architecture, params.seed)?;
    net.input_scaling = input_scaling;
    net.output_scaling = output_scaling;
    let layers = net.layers.clone();
    let mut weights: Vec<DMatrix<f64>> = layers
        .iter()
        .map(|l| DMatrix::from_row_slice(l.outputs, l.inputs, &l.weights))
        .collect();
    let mut biases: Vec<Vec<f64>> = layers.iter().map(|l| l.bias.clone()).collect();

    let all_x = columns(&xs, in_dim);
    let all_y = columns(&ys, out_dim);
    let mut full = Workspace::new(&net, n);
    let initial_loss = mse(full.forward(&layers, &weights, &biases, &all_x), &all_y);

    let batch = params.batch_size.min(n);
    let mut main_ws = Workspace::new(&net, batch);
    let tail = n % batch;
    let mut tail_ws = (tail > 0).then(|| Workspace::new(&net, tail));
    let mut bx = DMatrix::zeros(in_dim, batch);
    let mut by = DMatrix::zeros(out_dim, batch);
    let mut tx = DMatrix::zeros(in_dim, tail);
    let mut ty = DMatrix::zeros(out_dim, tail);

    let mut adam = Adam::new(&weights);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(0x5eed));
    let mut order: Vec<usize> = (0..n).collect();
    let mut history = Vec::with_capacity(params.epochs);
    for epoch in 0..params.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for chunk in order.chunks(batch) {
            let (ws, x, y) = if chunk.len() == batch {
                (&mut main_ws, &mut bx, &mut by)
            } else {
                (tail_ws.as_mut().unwrap(), &mut tx, &mut ty)
            };
            for (col, &i) in chunk.iter().enumerate() {
                x.column_mut(col).copy_from_slice(&xs[i]);
                y.column_mut(col).copy_from_slice(&ys[i]);
            }
            let loss = ws.forward_backward(&layers, &weights, &biases, x, y);
            if !loss.is_finite() {
                return Err(Error::Diverged { epoch, loss });
            }
            total += loss * chunk.len() as f64;
            adam.update(params, &mut weights, &mut biases, &ws.grad_w, &ws.grad_b);
        }
        history.push(total / n as f64);
    }

    let final_loss = mse(full.forward(&layers, &weights, &biases, &all_x), &all_y);
    if !final_loss.is_finite() {
        return Err(Error::Diverged {
            epoch: params.epochs,
            loss: final_loss,
        });
    }
    for ((layer, w), b) in net.layers.iter_mut().zip(&weights).zip(biases) {
        layer.weights = w.transpose().as_slice().to_vec();
        layer.bias = b;
    }
    Ok(TrainedInverse {
        net,
        initial_loss,
        final_loss,
        loss_history: history,
    })
}

/// Shuffled partition of `0..n` into `folds` near-equal groups.
pub fn kfold_partition(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 || n < folds {
        return Err(Error::InvalidInput(format!(
            "cannot split {n} points into {folds} folds"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / folds, n % folds);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        let mut fold = order[start..start + len].to_vec();
        fold.sort_unstable();
        out.push(fold);
        start += len;
    }
    Ok(out)
}

/// Held-out MSE of `net` in its own standardized output units.
pub fn standardized_mse(net: &MlpInverse, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for (x, t) in inputs.iter().zip(targets) {
        let pred = net.forward_standardized(&net.input_scaling.forward(x));
        let target = net.output_scaling.forward(t);
        total += pred
            .iter()
            .zip(&target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>();
        count += t.len();
    }
    total / count as f64
}

pub fn cross_validate(
    chart: &PcaChart,
    points: &PointCloud,
    folds: usize,
    params: &TrainParams,
) -> Result<Vec<f64>> {
    cross_validate_with(chart, points, folds, params, Exec::default())
}

/// k-fold cross validation: each fold is held out once while a fresh network
/// trains on the rest. Returns the held-out MSE of every fold.
pub fn cross_validate_with(
    chart: &PcaChart,
    points: &PointCloud,
    folds: usize,
    params: &TrainParams,
    exec: Exec,
) -> Result<Vec<f64>> {
    let (inputs, targets) = chart_pairs(chart, points)?;
    let partition = kfold_partition(points.n_points(), folds, params.seed)?;
    let scores = exec.map_slice(&partition, |held_out| -> Result<f64> {
        let mut is_held = vec![false; inputs.len()];
        held_out.iter().for_each(|&i| is_held[i] = true);
        let pick = |rows: &[Vec<f64>], held: bool| -> Vec<Vec<f64>> {
            rows.iter()
                .zip(&is_held)
                .filter(|(_, &h)| h == held)
                .map(|(r, _)| r.clone())
                .collect()
        };
        let trained = fit_network(&pick(&inputs, false), &pick(&targets, false), params)?;
        Ok(standardized_mse(
            &trained.net,
            &pick(&inputs, true),
            &pick(&targets, true),
        ))
    });
    scores.into_iter().collect()
}
