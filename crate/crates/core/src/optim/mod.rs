//! Optimizers, learning-rate schedules and rank-preserving pretraining.

mod adam;
mod muon;
mod pretrain;
mod schedule;

pub use adam::{adam_step, AdamState, DEFAULT_BETAS, DEFAULT_EPS};
pub use muon::{muon_step, partition, shape_scale, Group, MuonState, ParamRef, DEFAULT_MOMENTUM};
pub use pretrain::{covariance_loss, rank_pretrain, PretrainReport, UniformSampler};
pub use schedule::{lr_at, Schedule, ScheduleKind, DEFAULT_LR_MIN};

use crate::error::Result;
use crate::net::{Gradients, Network};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Adam,
    Muon,
}

impl OptimizerKind {
    pub fn name(&self) -> &'static str {
        match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Muon => "muon",
        }
    }
}

/// A stateful optimizer bound to one network, stepping with scheduled rates.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Adam { state: AdamState, schedule: Schedule },
    Muon { state: MuonState, muon: Schedule, aux: Schedule },
}

impl Optimizer {
    pub fn adam(net: &Network, schedule: Schedule) -> Self {
        Optimizer::Adam {
            state: AdamState::new(&muon::all_sizes(net)),
            schedule,
        }
    }

    pub fn muon(net: &Network, muon: Schedule, aux: Schedule) -> Self {
        Optimizer::Muon {
            state: MuonState::new(net),
            muon,
            aux,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        match self {
            Optimizer::Adam { .. } => OptimizerKind::Adam,
            Optimizer::Muon { .. } => OptimizerKind::Muon,
        }
    }

    /// Applies the update for training step `step` (0-based).
    pub fn step(&mut self, net: &mut Network, grads: &Gradients, step: usize) -> Result<()> {
        match self {
            Optimizer::Adam { state, schedule } => {
                let lr = schedule.lr_at(step);
                let g = muon::all_grads(grads);
                let mut p = muon::all_params(net);
                state.step(&mut p, &g, lr)
            }
            Optimizer::Muon { state, muon, aux } => muon_step(state, net, grads, muon.lr_at(step), aux.lr_at(step)),
        }
    }

    pub fn skipped_updates(&self) -> usize {
        match self {
            Optimizer::Adam { .. } => 0,
            Optimizer::Muon { state, .. } => state.skipped_updates,
        }
    }
}
