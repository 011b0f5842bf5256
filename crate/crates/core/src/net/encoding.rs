use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::linalg::{matmul, Matrix};

/// Fixed (non-trainable) input encoding applied before the first layer.
#[derive(Debug, Clone, PartialEq)]
pub enum Encoding {
    Identity,
    /// `γ(x) = [cos(2πBx); sin(2πBx)]` with `B` of shape `features x d`.
    FourierFeatures { b_matrix: Matrix, sigma: f64 },
    /// `sin/cos(2π 2ᵏ x_i)` for `k = 0..bands` and every input dimension.
    Positional { bands: usize },
}

impl Encoding {
    /// Draws `B` with i.i.d. `N(0, σ²)` entries.
    pub fn fourier<R: Rng + ?Sized>(features: usize, in_dim: usize, sigma: f64, rng: &mut R) -> Result<Self> {
        if features == 0 || !(sigma > 0.0) {
            return Err(Error::Config(format!(
                "fourier features need features >= 1 and sigma > 0 (got {features}, {sigma})"
            )));
        }
        let normal = Normal::new(0.0, sigma).map_err(|e| Error::Config(e.to_string()))?;
        let b_matrix = Matrix::from_fn(features, in_dim, |_, _| normal.sample(rng));
        Ok(Encoding::FourierFeatures { b_matrix, sigma })
    }

    pub fn output_dim(&self, in_dim: usize) -> usize {
        match self {
            Encoding::Identity => in_dim,
            Encoding::FourierFeatures { b_matrix, .. } => 2 * b_matrix.rows(),
            Encoding::Positional { bands } => 2 * bands * in_dim,
        }
    }

    /// Encodes a `d x B` batch of coordinates.
    pub fn encode(&self, coords: &Matrix) -> Result<Matrix> {
        match self {
            Encoding::Identity => Ok(coords.clone()),
            Encoding::FourierFeatures { b_matrix, .. } => {
                if b_matrix.cols() != coords.rows() {
                    return Err(Error::shape(
                        "encode",
                        format!("B is {}x{}, coords have {} rows", b_matrix.rows(), b_matrix.cols(), coords.rows()),
                    ));
                }
                let proj = matmul(b_matrix, coords)?;
                let cos = proj.map(|v| (2.0 * PI * v).cos());
                let sin = proj.map(|v| (2.0 * PI * v).sin());
                Matrix::vstack(&[&cos, &sin])
            }
            Encoding::Positional { bands } => {
                let (d, n) = coords.shape();
                let mut out = Matrix::zeros(2 * bands * d, n);
                for i in 0..d {
                    for k in 0..*bands {
                        let freq = 2.0 * PI * (1u64 << k) as f64;
                        let base = 2 * (i * bands + k);
                        for j in 0..n {
                            let arg = freq * coords[(i, j)];
                            out[(base, j)] = arg.sin();
                            out[(base + 1, j)] = arg.cos();
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Encoding::Identity => "identity",
            Encoding::FourierFeatures { .. } => "fourier",
            Encoding::Positional { .. } => "positional",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::numerical_rank;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identity_passes_through() {
        let x = Matrix::from_fn(2, 5, |i, j| i as f64 - j as f64 * 0.1);
        assert_eq!(Encoding::Identity.encode(&x).unwrap(), x);
    }

    #[test]
    fn fourier_at_origin() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let enc = Encoding::fourier(16, 2, 10.0, &mut rng).unwrap();
        assert_eq!(enc.output_dim(2), 32);
        let out = enc.encode(&Matrix::zeros(2, 3)).unwrap();
        for i in 0..16 {
            assert!(out.row(i).iter().all(|&v| v == 1.0));
            assert!(out.row(16 + i).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn fourier_expands_rank() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let coords = Matrix::from_fn(2, 256, |_, _| rng.gen_range(-1.0..1.0));
        assert_eq!(numerical_rank(&coords, 1e-10).unwrap(), 2);
        let enc = Encoding::fourier(64, 2, 10.0, &mut rng).unwrap();
        let encoded = enc.encode(&coords).unwrap();
        assert_eq!(encoded.shape(), (128, 256));
        assert_eq!(numerical_rank(&encoded, 1e-10).unwrap(), 128);
    }

    #[test]
    fn positional_shape_and_unit_period() {
        let enc = Encoding::Positional { bands: 4 };
        assert_eq!(enc.output_dim(3), 24);
        let x = Matrix::from_fn(3, 7, |i, j| -0.9 + 0.13 * (i + 2 * j) as f64);
        let shifted = x.map(|v| v + 1.0);
        let a = enc.encode(&x).unwrap();
        let b = enc.encode(&shifted).unwrap();
        assert!(a.sub(&b).unwrap().max_abs() < 1e-12);
    }

    #[test]
    fn fourier_rejects_mismatched_coords() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let enc = Encoding::fourier(4, 3, 1.0, &mut rng).unwrap();
        assert!(enc.encode(&Matrix::zeros(2, 4)).is_err());
    }
}
