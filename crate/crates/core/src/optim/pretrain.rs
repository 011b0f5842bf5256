//! Rank-preserving pretraining: gradient descent on `‖M_L‖²_F` where
//! `M_L = H_L H_Lᵀ / N` is the covariance of the last hidden activation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{matmul, matmul_nt, stable_rank, Matrix};
use crate::net::{ForwardCache, Network};

pub const PRETRAIN_BATCH: usize = 1024;

/// Uniform coordinates in `[low, high]^dim`.
#[derive(Debug, Clone)]
pub struct UniformSampler {
    pub dim: usize,
    pub low: f64,
    pub high: f64,
    rng: ChaCha8Rng,
}

impl UniformSampler {
    pub fn new(dim: usize, low: f64, high: f64, seed: u64) -> Self {
        Self {
            dim,
            low,
            high,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// A `dim × n` batch, one coordinate per column.
    pub fn sample(&mut self, n: usize) -> Matrix {
        let (lo, hi) = (self.low, self.high);
        let rng = &mut self.rng;
        Matrix::from_fn(self.dim, n, |_, _| rng.gen_range(lo..=hi))
    }
}

#[derive(Debug, Clone)]
pub struct PretrainReport {
    pub net: Network,
    /// Mini-batch objective before each step.
    pub losses: Vec<f64>,
    /// Objective on a fixed probe batch before and after.
    pub probe_loss_before: f64,
    pub probe_loss_after: f64,
    pub stable_rank_before: f64,
    pub stable_rank_after: f64,
}

fn last_hidden(cache: &ForwardCache) -> &Matrix {
    cache.inputs.last().expect("network has layers")
}

/// `‖H Hᵀ / N‖²_F` together with `M = H Hᵀ / N`.
fn covariance(h: &Matrix) -> Result<(f64, Matrix)> {
    let n = h.cols() as f64;
    let m = matmul_nt(h, h)?.scale(1.0 / n);
    Ok((m.sum_squares(), m))
}

pub fn covariance_loss(h: &Matrix) -> Result<f64> {
    if h.cols() == 0 {
        return Err(Error::EmptyInput("covariance of an empty batch".into()));
    }
    Ok(covariance(h)?.0)
}

fn probe(net: &Network, coords: &Matrix) -> Result<(f64, f64)> {
    let (_, cache) = net.forward(coords, true)?;
    let h = last_hidden(cache.as_ref().expect("captured"));
    let sr = if h.is_zero() { 0.0 } else { stable_rank(h)? };
    Ok((covariance_loss(h)?, sr))
}

/// Runs `steps` of plain gradient descent on the covariance objective with
/// batches drawn from `sampler`. Every weight and bias below the output layer
/// is updated; the output layer does not influence the objective.
pub fn rank_pretrain(net: &Network, sampler: &mut UniformSampler, steps: usize, lr: f64) -> Result<PretrainReport> {
    if net.depth() < 2 {
        return Err(Error::Config("rank pretraining needs at least one hidden layer".into()));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(Error::Config(format!("pretraining lr must be > 0, got {lr}")));
    }
    let probe_coords = sampler.sample(PRETRAIN_BATCH);
    let (probe_before, sr_before) = probe(net, &probe_coords)?;

    let mut net = net.clone();
    let last = net.depth() - 1;
    let mut losses = Vec::with_capacity(steps);
    for step in 0..steps {
        let x = sampler.sample(PRETRAIN_BATCH);
        let (_, cache) = net.forward(&x, true).map_err(|e| with_step(e, step))?;
        let cache = cache.expect("captured");
        let h = last_hidden(&cache);
        let (loss, m) = covariance(h)?;
        if !loss.is_finite() {
            return Err(Error::Divergence(format!(
                "rank pretraining objective became {loss} at step {step}; try a smaller learning rate than {lr}"
            )));
        }
        losses.push(loss);
        // d‖M‖² / dH = 4 M H / N
        let grad_h = matmul(&m, h)?.scale(4.0 / h.cols() as f64);
        let grads = net.backward_from_input_of(last, &cache, &grad_h)?;
        for l in 0..last {
            let layer = &mut net.layers[l];
            layer.weight.axpy(-lr, &grads.weights[l])?;
            for (b, g) in layer.bias.iter_mut().zip(&grads.biases[l]) {
                *b -= lr * g;
            }
        }
    }

    let (probe_after, sr_after) = probe(&net, &probe_coords).map_err(|e| match e {
        Error::Numeric { .. } => Error::Divergence(format!(
            "rank pretraining produced non-finite activations; try a smaller learning rate than {lr}"
        )),
        e => e,
    })?;
    if !probe_after.is_finite() {
        return Err(Error::Divergence(format!(
            "rank pretraining objective diverged; try a smaller learning rate than {lr}"
        )));
    }
    Ok(PretrainReport {
        net,
        losses,
        probe_loss_before: probe_before,
        probe_loss_after: probe_after,
        stable_rank_before: sr_before,
        stable_rank_after: sr_after,
    })
}

fn with_step(e: Error, step: usize) -> Error {
    match e {
        Error::Numeric { layer, detail, .. } => Error::Divergence(format!(
            "rank pretraining: non-finite value at step {step}, layer {layer} ({detail}); try a smaller learning rate"
        )),
        e => e,
    }
}
