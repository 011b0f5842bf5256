//! Newton–Schulz approximation of the polar factor.
//!
//! Each step applies the odd quintic `X ← aX + b(XXᵀ)X + c(XXᵀ)²X` to the
//! wide orientation of the input. All but the last step use the fast-growth
//! coefficients from the Muon reference, which push small singular values up
//! quickly but leave them scattered in roughly `[0.67, 1.2]`. The last step is
//! a polish whose coefficients minimize `max |p(x) - 1|` over that interval,
//! bringing every singular value within about 2% of one.

use super::norms::spectral_norm;
use super::{matmul, matmul_nt, Matrix};
use crate::error::{Error, Result};

pub const DEFAULT_NS_STEPS: usize = 5;

/// Growth coefficients `(a, b, c)`.
pub const MUON_COEFFS: (f64, f64, f64) = (3.4445, -4.7750, 2.0315);
/// Polishing coefficients `(a, b, c)`.
pub const POLISH_COEFFS: (f64, f64, f64) = (2.0583, -1.5379, 0.4850);

const NORM_TOL: f64 = 1e-10;
const NORM_MAX_ITER: usize = 200;

/// Approximate `PQᵀ` for `u = PΣQᵀ`. Output shape equals input shape.
///
/// The input is scaled by its spectral norm (power iteration), so the result
/// depends only on the direction of `u`.
pub fn newton_schulz_orthogonalize(u: &Matrix, steps: usize) -> Result<Matrix> {
    if steps == 0 {
        return Err(Error::Config("newton_schulz_orthogonalize needs steps >= 1".into()));
    }
    if u.is_empty() || u.is_zero() {
        return Err(Error::ZeroMatrix {
            op: "newton_schulz_orthogonalize",
        });
    }
    let sigma = spectral_norm(u, NORM_TOL, NORM_MAX_ITER).value;
    let tall = u.rows() > u.cols();
    let mut x = if tall { u.transpose() } else { u.clone() };
    x.scale_in_place(1.0 / sigma);

    for step in 0..steps {
        let (a, b, c) = if step + 1 == steps {
            POLISH_COEFFS
        } else {
            MUON_COEFFS
        };
        x = quintic_step(&x, a, b, c)?;
    }
    Ok(if tall { x.transpose() } else { x })
}

fn quintic_step(x: &Matrix, a: f64, b: f64, c: f64) -> Result<Matrix> {
    let gram = matmul_nt(x, x)?;
    let gram2 = matmul(&gram, &gram)?;
    let mut poly = gram.scale(b);
    poly.axpy(c, &gram2)?;
    let mut out = matmul(&poly, x)?;
    out.axpy(a, x)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius_norm, polar_factor_oracle, stable_rank};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| StandardNormal.sample(&mut rng))
    }

    fn rel_err(a: &Matrix, b: &Matrix) -> f64 {
        frobenius_norm(&a.sub(b).unwrap()) / frobenius_norm(b)
    }

    #[test]
    fn semi_orthogonal_input_is_near_fixed_point() {
        let q = polar_factor_oracle(&gaussian(10, 4, 1)).unwrap();
        let o = newton_schulz_orthogonalize(&q, DEFAULT_NS_STEPS).unwrap();
        assert!(rel_err(&o, &q) < 0.05);
    }

    #[test]
    fn scaled_identity_maps_to_identity() {
        let o = newton_schulz_orthogonalize(&Matrix::identity(3).scale(7.0), 5).unwrap();
        let diff = o.sub(&Matrix::identity(3)).unwrap();
        assert!(diff.max_abs() < 0.05, "{o:?}");
    }

    #[test]
    fn close_to_polar_oracle_on_tall_input() {
        let u = gaussian(32, 16, 3);
        let o = newton_schulz_orthogonalize(&u, 5).unwrap();
        assert_eq!(o.shape(), (32, 16));
        assert!(rel_err(&o, &polar_factor_oracle(&u).unwrap()) < 0.05);
    }

    #[test]
    fn rejects_zero_and_zero_steps() {
        assert!(matches!(
            newton_schulz_orthogonalize(&Matrix::zeros(3, 2), 5),
            Err(Error::ZeroMatrix { .. })
        ));
        assert!(newton_schulz_orthogonalize(&Matrix::identity(2), 0).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn scale_invariant(rows in 1usize..24, cols in 1usize..24, seed in 0u64..1000, log_c in -3.0f64..3.0) {
            let u = gaussian(rows, cols, seed);
            let c = 10f64.powf(log_c);
            let a = newton_schulz_orthogonalize(&u, 5).unwrap();
            let b = newton_schulz_orthogonalize(&u.scale(c), 5).unwrap();
            prop_assert!(a.sub(&b).unwrap().max_abs() < 1e-9);
        }
    }

    #[test]
    fn tall_output_has_high_stable_rank() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        for case in 0..50 {
            let k = rng.gen_range(1..16);
            let n = k + rng.gen_range(0..32);
            let o = newton_schulz_orthogonalize(&gaussian(n, k, case), 5).unwrap();
            let s = stable_rank(&o).unwrap();
            assert!(s >= 0.95 * k as f64, "{n}x{k}: {s}");
        }
    }
}

