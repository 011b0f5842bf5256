//! Dense linear algebra: products, norms, stable rank and orthogonalization.

mod kernels;
mod matrix;
mod norms;
mod ortho;
pub mod oracle;

pub use kernels::{matmul, matmul_nt, matmul_tn};
pub use matrix::Matrix;
pub use norms::{frobenius_norm, spectral_norm, stable_rank, SpectralEstimate, POWER_MAX_ITER, POWER_TOL};
pub use oracle::{jacobi_svd, numerical_rank, polar_factor_oracle, Svd};
pub use ortho::{newton_schulz_orthogonalize, DEFAULT_NS_STEPS, MUON_COEFFS, POLISH_COEFFS};

#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    proptest! {
        #[test]
        fn stable_rank_bounds(rows in 1usize..20, cols in 1usize..20, seed in 0u64..10_000) {
            let a = gaussian(rows, cols, seed);
            let s = stable_rank(&a).unwrap();
            prop_assert!(s >= 1.0 - 1e-9);
            prop_assert!(s <= rows.min(cols) as f64 + 1e-9);
            prop_assert!(spectral_norm(&a, POWER_TOL, POWER_MAX_ITER).value <= frobenius_norm(&a) * (1.0 + 1e-12));
        }

        #[test]
        fn stable_rank_scale_invariant(rows in 1usize..16, cols in 1usize..16, seed in 0u64..10_000, c in prop_oneof![-1e3f64..-1e-3, 1e-3f64..1e3]) {
            let a = gaussian(rows, cols, seed);
            let s1 = stable_rank(&a).unwrap();
            let s2 = stable_rank(&a.scale(c)).unwrap();
            prop_assert!((s1 - s2).abs() < 1e-9);
        }

        #[test]
        fn polar_oracle_orthonormal_columns(k in 1usize..12, extra in 0usize..12, seed in 0u64..10_000) {
            let p = polar_factor_oracle(&gaussian(k + extra, k, seed)).unwrap();
            let gram = matmul(&p.transpose(), &p).unwrap();
            prop_assert!(frobenius_norm(&gram.sub(&Matrix::identity(k)).unwrap()) < 1e-9);
        }
    }
}
