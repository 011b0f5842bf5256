//! Hybrid Muon: orthogonalized momentum for hidden weight matrices, Adam for
//! everything else.

use super::adam::AdamState;
use crate::error::{Error, Result};
use crate::linalg::{newton_schulz_orthogonalize, Matrix, DEFAULT_NS_STEPS};
use crate::net::{Gradients, Network};

pub const DEFAULT_MOMENTUM: f64 = 0.95;

/// Which optimizer group owns a parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    Muon,
    Auxiliary,
}

/// A single trainable tensor of a [`Network`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamRef {
    Weight(usize),
    Bias(usize),
}

/// Assigns every parameter of `net` to exactly one group: hidden-to-hidden
/// weight matrices go to Muon; the first and last weight matrices and all
/// biases go to the auxiliary Adam group.
pub fn partition(net: &Network) -> Vec<(ParamRef, Group)> {
    let hidden = net.hidden_layer_indices();
    let mut out = Vec::with_capacity(2 * net.depth());
    for l in 0..net.depth() {
        let g = if hidden.contains(&l) { Group::Muon } else { Group::Auxiliary };
        out.push((ParamRef::Weight(l), g));
        out.push((ParamRef::Bias(l), Group::Auxiliary));
    }
    out
}

#[derive(Debug, Clone)]
pub struct MuonState {
    pub momentum: f64,
    pub nesterov: bool,
    pub ns_steps: usize,
    /// Momentum buffers, one per Muon-group weight, in layer order.
    buffers: Vec<Matrix>,
    muon_layers: Vec<usize>,
    aux_params: Vec<ParamRef>,
    pub aux: AdamState,
    /// Number of per-layer updates skipped because the direction was zero.
    pub skipped_updates: usize,
}

impl MuonState {
    pub fn new(net: &Network) -> Self {
        let groups = partition(net);
        let muon_layers: Vec<usize> = groups
            .iter()
            .filter_map(|(p, g)| match (p, g) {
                (ParamRef::Weight(l), Group::Muon) => Some(*l),
                _ => None,
            })
            .collect();
        let aux_params: Vec<ParamRef> = groups
            .iter()
            .filter(|(_, g)| *g == Group::Auxiliary)
            .map(|(p, _)| *p)
            .collect();
        let sizes: Vec<usize> = aux_params.iter().map(|p| param_len(net, *p)).collect();
        Self {
            momentum: DEFAULT_MOMENTUM,
            nesterov: true,
            ns_steps: DEFAULT_NS_STEPS,
            buffers: muon_layers
                .iter()
                .map(|&l| Matrix::zeros(net.layers[l].out_dim(), net.layers[l].in_dim()))
                .collect(),
            muon_layers,
            aux_params,
            aux: AdamState::new(&sizes),
            skipped_updates: 0,
        }
    }

    pub fn with_momentum(mut self, momentum: f64, nesterov: bool) -> Self {
        self.momentum = momentum;
        self.nesterov = nesterov;
        self
    }

    pub fn muon_layers(&self) -> &[usize] {
        &self.muon_layers
    }

    pub fn aux_params(&self) -> &[ParamRef] {
        &self.aux_params
    }

    pub fn buffers(&self) -> &[Matrix] {
        &self.buffers
    }
}

fn param_len(net: &Network, p: ParamRef) -> usize {
    match p {
        ParamRef::Weight(l) => net.layers[l].weight.len(),
        ParamRef::Bias(l) => net.layers[l].bias.len(),
    }
}

/// Update scale `√max(1, d_out / d_in)` applied to the orthogonalized direction.
pub fn shape_scale(d_out: usize, d_in: usize) -> f64 {
    (d_out as f64 / d_in as f64).max(1.0).sqrt()
}

/// The orthogonalized direction for a hidden weight gradient given the
/// current momentum buffer (which is updated in place). Returns `None` when the
/// direction is zero.
fn muon_direction(buffer: &mut Matrix, grad: &Matrix, momentum: f64, nesterov: bool, ns_steps: usize) -> Result<Option<Matrix>> {
    buffer.scale_in_place(momentum);
    buffer.axpy(1.0, grad)?;
    let update = if nesterov {
        let mut u = grad.clone();
        u.axpy(momentum, buffer)?;
        u
    } else {
        buffer.clone()
    };
    if update.is_zero() {
        return Ok(None);
    }
    Ok(Some(newton_schulz_orthogonalize(&update, ns_steps)?))
}

pub fn muon_step(state: &mut MuonState, net: &mut Network, grads: &Gradients, lr_muon: f64, lr_aux: f64) -> Result<()> {
    if grads.weights.len() != net.depth() || grads.biases.len() != net.depth() {
        return Err(Error::shape("muon_step", "gradients do not match network depth"));
    }
    if !(lr_muon >= 0.0 && lr_aux >= 0.0) {
        return Err(Error::Config(format!("muon learning rates must be >= 0 ({lr_muon}, {lr_aux})")));
    }
    for (k, &l) in state.muon_layers.iter().enumerate() {
        let g = &grads.weights[l];
        if g.shape() != net.layers[l].weight.shape() {
            return Err(Error::shape("muon_step", format!("layer {l} gradient shape")));
        }
        match muon_direction(&mut state.buffers[k], g, state.momentum, state.nesterov, state.ns_steps)? {
            Some(dir) => {
                let w = &mut net.layers[l].weight;
                let scale = shape_scale(w.rows(), w.cols());
                w.axpy(-lr_muon * scale, &dir)?;
            }
            None => state.skipped_updates += 1,
        }
    }

    let aux_grads: Vec<&[f64]> = state
        .aux_params
        .iter()
        .map(|p| match *p {
            ParamRef::Weight(l) => grads.weights[l].data(),
            ParamRef::Bias(l) => grads.biases[l].as_slice(),
        })
        .collect();
    let mut aux_params = aux_slices(net, &state.aux_params);
    state.aux.step(&mut aux_params, &aux_grads, lr_aux)
}

/// Mutable views of the listed parameters, in the listed order.
fn aux_slices<'a>(net: &'a mut Network, params: &[ParamRef]) -> Vec<&'a mut [f64]> {
    let mut weights: Vec<Option<&'a mut [f64]>> = Vec::new();
    let mut biases: Vec<Option<&'a mut [f64]>> = Vec::new();
    for layer in net.layers.iter_mut() {
        weights.push(Some(layer.weight.data_mut()));
        biases.push(Some(layer.bias.as_mut_slice()));
    }
    params
        .iter()
        .map(|p| match *p {
            ParamRef::Weight(l) => weights[l].take().expect("parameter listed once"),
            ParamRef::Bias(l) => biases[l].take().expect("parameter listed once"),
        })
        .collect()
}

/// Every parameter of `net` in `[W0, b0, W1, b1, ...]` order.
pub(crate) fn all_params(net: &mut Network) -> Vec<&mut [f64]> {
    let mut out = Vec::with_capacity(2 * net.depth());
    for layer in net.layers.iter_mut() {
        out.push(layer.weight.data_mut());
        out.push(layer.bias.as_mut_slice());
    }
    out
}

pub(crate) fn all_grads(grads: &Gradients) -> Vec<&[f64]> {
    let mut out = Vec::with_capacity(2 * grads.weights.len());
    for (w, b) in grads.weights.iter().zip(&grads.biases) {
        out.push(w.data());
        out.push(b.as_slice());
    }
    out
}

pub(crate) fn all_sizes(net: &Network) -> Vec<usize> {
    net.layers.iter().flat_map(|l| [l.weight.len(), l.bias.len()]).collect()
}
