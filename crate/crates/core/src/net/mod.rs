//! Coordinate MLPs with manual forward and backward passes.
//!
//! Activations are stored column-per-sample: a batch of `B` inputs of
//! dimension `d` is a `d x B` matrix, so layer `l` computes
//! `Z_{l+1} = W_l H_l + b_l` and `H_{l+1} = σ(Z_{l+1})`.

mod activation;
mod encoding;

pub use activation::ActivationKind;
pub use encoding::Encoding;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{matmul, matmul_nt, matmul_tn, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// `d_out x d_in`
    pub weight: Matrix,
    pub bias: Vec<f64>,
    /// `None` for the linear output layer.
    pub activation: Option<ActivationKind>,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }
}

/// Which input encoding to build, before any random draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EncodingSpec {
    Identity,
    Fourier { features: usize, sigma: f64 },
    Positional { bands: usize },
}

/// Architecture description used to build a [`Network`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArchSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Number of weight layers, including the linear output layer.
    pub depth: usize,
    pub hidden_dim: usize,
    /// Activation of the first layer (carries `ω₀` for sinusoidal nets).
    pub first_activation: ActivationKind,
    /// Activation of the remaining hidden layers.
    pub hidden_activation: ActivationKind,
    pub encoding: EncodingSpec,
}

impl ArchSpec {
    /// Same activation in every hidden layer.
    pub fn uniform(in_dim: usize, out_dim: usize, depth: usize, hidden_dim: usize, act: ActivationKind) -> Self {
        Self {
            in_dim,
            out_dim,
            depth,
            hidden_dim,
            first_activation: act,
            hidden_activation: act,
            encoding: EncodingSpec::Identity,
        }
    }

    pub fn with_encoding(mut self, encoding: EncodingSpec) -> Self {
        self.encoding = encoding;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth < 2 {
            return Err(Error::Config(format!("depth must be >= 2, got {}", self.depth)));
        }
        if self.hidden_dim == 0 || self.in_dim == 0 || self.out_dim == 0 {
            return Err(Error::Config("in_dim, out_dim and hidden_dim must be >= 1".into()));
        }
        if std::mem::discriminant(&self.first_activation) != std::mem::discriminant(&self.hidden_activation) {
            return Err(Error::Config(format!(
                "first and hidden activations must be the same family ({} vs {})",
                self.first_activation.name(),
                self.hidden_activation.name()
            )));
        }
        self.first_activation.validate()?;
        self.hidden_activation.validate()?;
        match self.encoding {
            EncodingSpec::Identity => Ok(()),
            EncodingSpec::Fourier { features, sigma } => {
                if features == 0 || !(sigma > 0.0) {
                    Err(Error::Config("fourier encoding needs features >= 1 and sigma > 0".into()))
                } else {
                    Ok(())
                }
            }
            EncodingSpec::Positional { bands } => {
                if bands == 0 || bands > 30 {
                    Err(Error::Config(format!("positional bands must be in 1..=30, got {bands}")))
                } else {
                    Ok(())
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub encoding: Encoding,
    pub layers: Vec<Layer>,
    pub in_dim: usize,
}

/// Per-layer activations captured during [`Network::forward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// `inputs[l]` is `H_l`, the input of layer `l` (`inputs[0]` is the encoded batch).
    pub inputs: Vec<Matrix>,
    /// `pre_activations[l]` is `Z_{l+1} = W_l H_l + b_l`.
    pub pre_activations: Vec<Matrix>,
}

impl ForwardCache {
    pub fn depth(&self) -> usize {
        self.inputs.len()
    }

    pub fn batch_size(&self) -> usize {
        self.inputs.first().map_or(0, Matrix::cols)
    }
}

/// Parameter gradients and backpropagated signals from [`Network::backward`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
    /// `deltas[l]` is `G_{l+1} = ∂L/∂Z_{l+1}`, so `weights[l] = deltas[l] · H_lᵀ`.
    pub deltas: Vec<Matrix>,
}

impl Gradients {
    pub fn zeros_like(net: &Network) -> Self {
        Self {
            weights: net.layers.iter().map(|l| Matrix::zeros(l.out_dim(), l.in_dim())).collect(),
            biases: net.layers.iter().map(|l| vec![0.0; l.out_dim()]).collect(),
            deltas: Vec::new(),
        }
    }
}

pub fn build_network(arch: &ArchSpec, seed: u64) -> Result<Network> {
    arch.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let encoding = match arch.encoding {
        EncodingSpec::Identity => Encoding::Identity,
        EncodingSpec::Fourier { features, sigma } => Encoding::fourier(features, arch.in_dim, sigma, &mut rng)?,
        EncodingSpec::Positional { bands } => Encoding::Positional { bands },
    };
    let first_in = encoding.output_dim(arch.in_dim);

    let mut layers = Vec::with_capacity(arch.depth);
    for l in 0..arch.depth {
        let d_in = if l == 0 { first_in } else { arch.hidden_dim };
        let is_output = l + 1 == arch.depth;
        let d_out = if is_output { arch.out_dim } else { arch.hidden_dim };
        let activation = if is_output {
            None
        } else if l == 0 {
            Some(arch.first_activation)
        } else {
            Some(arch.hidden_activation)
        };

        let family = arch.hidden_activation;
        let w_bound = if family.is_periodic() {
            if l == 0 {
                1.0 / d_in as f64
            } else {
                let omega = match family {
                    ActivationKind::Sine { omega } | ActivationKind::Finer { omega } => omega,
                    _ => unreachable!(),
                };
                (6.0 / d_in as f64).sqrt() / omega
            }
        } else {
            (1.0 / d_in as f64).sqrt()
        };
        let b_bound = match activation {
            Some(ActivationKind::Finer { .. }) => std::f64::consts::FRAC_1_SQRT_2,
            _ => (1.0 / d_in as f64).sqrt(),
        };
        let weight = Matrix::from_fn(d_out, d_in, |_, _| rng.gen_range(-w_bound..=w_bound));
        let bias = (0..d_out).map(|_| rng.gen_range(-b_bound..=b_bound)).collect();
        layers.push(Layer {
            weight,
            bias,
            activation,
        });
    }
    Ok(Network {
        encoding,
        layers,
        in_dim: arch.in_dim,
    })
}

impl Network {
    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn out_dim(&self) -> usize {
        self.layers.last().map_or(0, Layer::out_dim)
    }

    pub fn hidden_dim(&self) -> usize {
        self.layers.first().map_or(0, Layer::out_dim)
    }

    /// Indices of hidden-to-hidden layers (every layer except the first and
    /// the output layer).
    pub fn hidden_layer_indices(&self) -> std::ops::Range<usize> {
        1..self.depth().saturating_sub(1).max(1)
    }

    pub fn parameter_count(&self) -> usize {
        self.layers.iter().map(|l| l.weight.len() + l.bias.len()).sum()
    }

    /// Evaluates the network on a `d x B` batch.
    pub fn forward(&self, coords: &Matrix, capture: bool) -> Result<(Matrix, Option<ForwardCache>)> {
        if coords.rows() != self.in_dim {
            return Err(Error::shape(
                "forward",
                format!("network expects {} input rows, got {}", self.in_dim, coords.rows()),
            ));
        }
        let mut h = self.encoding.encode(coords)?;
        let mut inputs = Vec::new();
        let mut pre = Vec::new();
        for (idx, layer) in self.layers.iter().enumerate() {
            let mut z = matmul(&layer.weight, &h)?;
            add_bias(&mut z, &layer.bias);
            let out = match layer.activation {
                Some(act) => z.map(|v| act.apply(v)),
                None => z.clone(),
            };
            if !out.all_finite() {
                return Err(Error::Numeric {
                    step: None,
                    layer: idx,
                    detail: "non-finite activation in forward pass".into(),
                });
            }
            if capture {
                inputs.push(h);
                pre.push(z);
            }
            h = out;
        }
        let cache = capture.then_some(ForwardCache {
            inputs,
            pre_activations: pre,
        });
        Ok((h, cache))
    }

    /// Output-only evaluation.
    pub fn predict(&self, coords: &Matrix) -> Result<Matrix> {
        Ok(self.forward(coords, false)?.0)
    }

    /// Backpropagates `∂L/∂output` through every layer.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &Matrix) -> Result<Gradients> {
        self.check_cache(cache)?;
        let last = self.depth() - 1;
        let expected = (self.out_dim(), cache.batch_size());
        if grad_output.shape() != expected {
            return Err(Error::shape(
                "backward",
                format!("grad_output {:?}, expected {:?}", grad_output.shape(), expected),
            ));
        }
        self.backprop(cache, last, grad_output.clone())
    }

    /// Backpropagates `∂L/∂H_k`, a gradient with respect to the input of layer
    /// `k`, into layers `0..k`. Layers `k..` receive zero gradients.
    pub fn backward_from_input_of(&self, layer: usize, cache: &ForwardCache, grad_input: &Matrix) -> Result<Gradients> {
        self.check_cache(cache)?;
        if layer == 0 || layer >= self.depth() {
            return Err(Error::shape("backward_from_input_of", format!("layer {layer} out of range")));
        }
        if grad_input.shape() != cache.inputs[layer].shape() {
            return Err(Error::shape(
                "backward_from_input_of",
                format!("gradient {:?} vs activation {:?}", grad_input.shape(), cache.inputs[layer].shape()),
            ));
        }
        let prev = layer - 1;
        let act = self.layers[prev].activation.expect("hidden layers have activations");
        let delta = activation_delta(act, &cache.pre_activations[prev], grad_input)?;
        let mut grads = self.backprop(cache, prev, delta)?;
        for l in layer..self.depth() {
            grads.weights[l] = Matrix::zeros(self.layers[l].out_dim(), self.layers[l].in_dim());
            grads.biases[l] = vec![0.0; self.layers[l].out_dim()];
        }
        Ok(grads)
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        if cache.depth() != self.depth() || cache.pre_activations.len() != self.depth() {
            return Err(Error::shape(
                "backward",
                format!("cache depth {} vs network depth {}", cache.depth(), self.depth()),
            ));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if cache.inputs[l].rows() != layer.in_dim() || cache.pre_activations[l].rows() != layer.out_dim() {
                return Err(Error::shape("backward", format!("cache does not match layer {l}")));
            }
        }
        Ok(())
    }

    /// `delta` is `G_{top+1}`; walks down from layer `top`.
    fn backprop(&self, cache: &ForwardCache, top: usize, mut delta: Matrix) -> Result<Gradients> {
        let depth = self.depth();
        let mut weights: Vec<Option<Matrix>> = vec![None; depth];
        let mut biases: Vec<Option<Vec<f64>>> = vec![None; depth];
        let mut deltas: Vec<Option<Matrix>> = vec![None; depth];
        for l in (0..=top).rev() {
            let h = &cache.inputs[l];
            weights[l] = Some(matmul_nt(&delta, h)?);
            biases[l] = Some(delta.row_sums());
            if l > 0 {
                let grad_h = matmul_tn(&self.layers[l].weight, &delta)?;
                let act = self.layers[l - 1].activation.expect("hidden layers have activations");
                let next = activation_delta(act, &cache.pre_activations[l - 1], &grad_h)?;
                deltas[l] = Some(std::mem::replace(&mut delta, next));
            } else {
                deltas[l] = Some(std::mem::replace(&mut delta, Matrix::zeros(0, 0)));
            }
        }
        let batch = cache.batch_size();
        Ok(Gradients {
            weights: weights
                .into_iter()
                .zip(&self.layers)
                .map(|(w, layer)| w.unwrap_or_else(|| Matrix::zeros(layer.out_dim(), layer.in_dim())))
                .collect(),
            biases: biases
                .into_iter()
                .zip(&self.layers)
                .map(|(b, layer)| b.unwrap_or_else(|| vec![0.0; layer.out_dim()]))
                .collect(),
            deltas: deltas
                .into_iter()
                .zip(&self.layers)
                .map(|(d, layer)| d.unwrap_or_else(|| Matrix::zeros(layer.out_dim(), batch)))
                .collect(),
        })
    }
}

fn add_bias(z: &mut Matrix, bias: &[f64]) {
    for (i, &b) in bias.iter().enumerate() {
        z.row_mut(i).iter_mut().for_each(|v| *v += b);
    }
}

fn activation_delta(act: ActivationKind, z: &Matrix, grad: &Matrix) -> Result<Matrix> {
    if z.shape() != grad.shape() {
        return Err(Error::shape("activation_delta", format!("{:?} vs {:?}", z.shape(), grad.shape())));
    }
    let data = z
        .data()
        .iter()
        .zip(grad.data())
        .map(|(&zv, &g)| g * act.derivative(zv))
        .collect();
    Ok(Matrix::from_vec_unchecked(z.rows(), z.cols(), data))
}

#[cfg(test)]
mod tests;
