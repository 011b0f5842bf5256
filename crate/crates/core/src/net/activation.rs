use std::fmt;

use crate::error::{Error, Result};

/// Pointwise nonlinearity of a hidden layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ActivationKind {
    Relu,
    /// `sin(ω z)`
    Sine { omega: f64 },
    /// `exp(-0.5 z² / a²)`
    Gaussian { a: f64 },
    /// Real Gabor wavelet `cos(ω z) · exp(-(s z)²)`.
    GaborReal { omega: f64, s: f64 },
    /// Variable-periodic sine `sin(ω (|z| + 1) z)`.
    Finer { omega: f64 },
}

impl ActivationKind {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, v: f64| {
            Err(Error::Config(format!("activation parameter {name} must be > 0, got {v}")))
        };
        match *self {
            ActivationKind::Relu => Ok(()),
            ActivationKind::Sine { omega } | ActivationKind::Finer { omega } => {
                if omega > 0.0 && omega.is_finite() {
                    Ok(())
                } else {
                    bad("omega", omega)
                }
            }
            ActivationKind::Gaussian { a } => {
                if a > 0.0 && a.is_finite() {
                    Ok(())
                } else {
                    bad("a", a)
                }
            }
            ActivationKind::GaborReal { omega, s } => {
                if !(omega > 0.0 && omega.is_finite()) {
                    bad("omega", omega)
                } else if !(s > 0.0 && s.is_finite()) {
                    bad("s", s)
                } else {
                    Ok(())
                }
            }
        }
    }

    #[inline]
    pub fn apply(&self, z: f64) -> f64 {
        match *self {
            ActivationKind::Relu => z.max(0.0),
            ActivationKind::Sine { omega } => (omega * z).sin(),
            ActivationKind::Gaussian { a } => (-0.5 * z * z / (a * a)).exp(),
            ActivationKind::GaborReal { omega, s } => (omega * z).cos() * (-(s * z) * (s * z)).exp(),
            ActivationKind::Finer { omega } => (omega * (z.abs() + 1.0) * z).sin(),
        }
    }

    /// Derivative with respect to the pre-activation. ReLU uses 0 at z = 0.
    #[inline]
    pub fn derivative(&self, z: f64) -> f64 {
        match *self {
            ActivationKind::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActivationKind::Sine { omega } => omega * (omega * z).cos(),
            ActivationKind::Gaussian { a } => {
                let a2 = a * a;
                -z / a2 * (-0.5 * z * z / a2).exp()
            }
            ActivationKind::GaborReal { omega, s } => {
                let env = (-(s * z) * (s * z)).exp();
                let wz = omega * z;
                env * (-omega * wz.sin() - 2.0 * s * s * z * wz.cos())
            }
            ActivationKind::Finer { omega } => {
                let scale = z.abs() + 1.0;
                omega * (2.0 * z.abs() + 1.0) * (omega * scale * z).cos()
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ActivationKind::Relu => "relu",
            ActivationKind::Sine { .. } => "sine",
            ActivationKind::Gaussian { .. } => "gaussian",
            ActivationKind::GaborReal { .. } => "gabor",
            ActivationKind::Finer { .. } => "finer",
        }
    }

    /// Whether this activation uses the sinusoidal initialization scheme.
    pub fn is_periodic(&self) -> bool {
        matches!(self, ActivationKind::Sine { .. } | ActivationKind::Finer { .. })
    }
}

impl fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ActivationKind::Relu => write!(f, "relu"),
            ActivationKind::Sine { omega } => write!(f, "sine(omega={omega})"),
            ActivationKind::Gaussian { a } => write!(f, "gaussian(a={a})"),
            ActivationKind::GaborReal { omega, s } => write!(f, "gabor(omega={omega}, s={s})"),
            ActivationKind::Finer { omega } => write!(f, "finer(omega={omega})"),
        }
    }
}
