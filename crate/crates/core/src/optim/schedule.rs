use std::f64::consts::PI;

use crate::error::{Error, Result};

pub const DEFAULT_LR_MIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleKind {
    Constant,
    CosineAnnealing { lr_min: f64, total_steps: usize },
    ExponentialDecay { gamma: f64 },
}

/// Learning-rate schedule with base rate `base_lr`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub kind: ScheduleKind,
    pub base_lr: f64,
}

impl Schedule {
    pub fn new(kind: ScheduleKind, base_lr: f64) -> Result<Self> {
        if !(base_lr > 0.0 && base_lr.is_finite()) {
            return Err(Error::Config(format!("learning rate must be > 0, got {base_lr}")));
        }
        match kind {
            ScheduleKind::CosineAnnealing { lr_min, .. } if !(lr_min > 0.0) => {
                return Err(Error::Config(format!("cosine lr_min must be > 0, got {lr_min}")))
            }
            ScheduleKind::ExponentialDecay { gamma } if !(gamma > 0.0 && gamma <= 1.0) => {
                return Err(Error::Config(format!("decay gamma must be in (0, 1], got {gamma}")))
            }
            _ => {}
        }
        Ok(Self { kind, base_lr })
    }

    pub fn constant(base_lr: f64) -> Self {
        Self {
            kind: ScheduleKind::Constant,
            base_lr,
        }
    }

    /// Same shape, different base rate.
    pub fn with_base(&self, base_lr: f64) -> Self {
        Self { base_lr, ..*self }
    }

    pub fn lr_at(&self, step: usize) -> f64 {
        lr_at(self, step)
    }
}

pub fn lr_at(schedule: &Schedule, step: usize) -> f64 {
    let eta0 = schedule.base_lr;
    match schedule.kind {
        ScheduleKind::Constant => eta0,
        ScheduleKind::CosineAnnealing { lr_min, total_steps } => {
            if total_steps == 0 {
                return eta0;
            }
            let t = step.min(total_steps) as f64 / total_steps as f64;
            lr_min + 0.5 * (eta0 - lr_min) * (1.0 + (PI * t).cos())
        }
        ScheduleKind::ExponentialDecay { gamma } => eta0 * gamma.powi(step.min(i32::MAX as usize) as i32),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cosine_endpoints() {
        let s = Schedule::new(
            ScheduleKind::CosineAnnealing {
                lr_min: DEFAULT_LR_MIN,
                total_steps: 5000,
            },
            1e-3,
        )
        .unwrap();
        assert_eq!(s.lr_at(0), 1e-3);
        assert!((s.lr_at(5000) - 1e-6).abs() < 1e-18);
        let mid = s.lr_at(2500);
        assert!((mid - (1e-6 + 0.5 * (1e-3 - 1e-6))).abs() < 1e-15);
        assert!((1..=5000).all(|t| s.lr_at(t) > 0.0 && s.lr_at(t) <= s.lr_at(t - 1)));
    }

    #[test]
    fn exponential_and_constant() {
        let s = Schedule::new(ScheduleKind::ExponentialDecay { gamma: 0.5 }, 0.8).unwrap();
        assert_eq!(s.lr_at(3), 0.1);
        assert_eq!(Schedule::constant(0.3).lr_at(1000), 0.3);
    }

    #[test]
    fn rejects_bad_rates() {
        assert!(Schedule::new(ScheduleKind::Constant, 0.0).is_err());
        assert!(Schedule::new(ScheduleKind::ExponentialDecay { gamma: 1.5 }, 1.0).is_err());
        assert!(Schedule::new(
            ScheduleKind::CosineAnnealing {
                lr_min: 0.0,
                total_steps: 1
            },
            1.0
        )
        .is_err());
    }
}
