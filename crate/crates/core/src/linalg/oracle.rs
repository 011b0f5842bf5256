//! Small-instance reference decompositions.
//!
//! One-sided Jacobi SVD is slow but accurate to machine precision, which makes
//! it the yardstick for the power iteration and Newton–Schulz kernels.

use super::Matrix;
use crate::error::{Error, Result};

/// Largest min(rows, cols) accepted by [`polar_factor_oracle`].
pub const ORACLE_MAX_DIM: usize = 64;

/// Thin SVD `A = U diag(sigma) Vᵀ` with `sigma` sorted descending.
#[derive(Debug, Clone)]
pub struct Svd {
    /// rows x k, orthonormal columns for non-zero singular values.
    pub u: Matrix,
    pub sigma: Vec<f64>,
    /// cols x k, orthonormal columns.
    pub v: Matrix,
}

/// One-sided (Hestenes) Jacobi SVD.
pub fn jacobi_svd(a: &Matrix) -> Result<Svd> {
    if a.rows() < a.cols() {
        let t = jacobi_svd(&a.transpose())?;
        return Ok(Svd {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        });
    }
    let (m, n) = a.shape();
    // Work on columns: store Aᵀ so each column is a contiguous row.
    let mut cols = a.transpose();
    let mut v = Matrix::identity(n);
    const EPS: f64 = 1e-15;
    const MAX_SWEEPS: usize = 80;

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in (p + 1)..n {
                let (alpha, beta, gamma) = {
                    let cp = cols.row(p);
                    let cq = cols.row(q);
                    let mut al = 0.0;
                    let mut be = 0.0;
                    let mut ga = 0.0;
                    for k in 0..m {
                        al += cp[k] * cp[k];
                        be += cq[k] * cq[k];
                        ga += cp[k] * cq[k];
                    }
                    (al, be, ga)
                };
                if gamma == 0.0 || gamma.abs() <= EPS * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_rows(&mut cols, p, q, c, s);
                rotate_rows_v(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut sigma: Vec<f64> = (0..n)
        .map(|j| cols.row(j).iter().map(|x| x * x).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| sigma[j].total_cmp(&sigma[i]));

    let mut u = Matrix::zeros(m, n);
    let mut vv = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let s = sigma[src];
        for k in 0..m {
            u[(k, dst)] = if s > 0.0 { cols[(src, k)] / s } else { 0.0 };
        }
        for k in 0..n {
            vv[(k, dst)] = v[(k, src)];
        }
    }
    sigma = order.iter().map(|&i| sigma[i]).collect();
    Ok(Svd { u, sigma, v: vv })
}

fn rotate_rows(m: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let cols = m.cols();
    let data = m.data_mut();
    for k in 0..cols {
        let x = data[p * cols + k];
        let y = data[q * cols + k];
        data[p * cols + k] = c * x - s * y;
        data[q * cols + k] = s * x + c * y;
    }
}

fn rotate_rows_v(v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    // v columns p, q rotate together with the working columns.
    for k in 0..v.rows() {
        let x = v[(k, p)];
        let y = v[(k, q)];
        v[(k, p)] = c * x - s * y;
        v[(k, q)] = s * x + c * y;
    }
}

/// Exact polar factor `PQᵀ` of `u = PΣQᵀ`, the Frobenius-nearest
/// semi-orthogonal matrix.
pub fn polar_factor_oracle(u: &Matrix) -> Result<Matrix> {
    let k = u.rows().min(u.cols());
    if k > ORACLE_MAX_DIM {
        return Err(Error::OracleLimit(format!(
            "min dimension {k} exceeds {ORACLE_MAX_DIM}"
        )));
    }
    if u.is_zero() {
        return Err(Error::ZeroMatrix {
            op: "polar_factor_oracle",
        });
    }
    let svd = jacobi_svd(u)?;
    super::matmul(&svd.u, &svd.v.transpose())
}

/// Number of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(a: &Matrix, rel_tol: f64) -> Result<usize> {
    let svd = jacobi_svd(a)?;
    let top = svd.sigma.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return Ok(0);
    }
    Ok(svd.sigma.iter().filter(|&&s| s > rel_tol * top).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{frobenius_norm, matmul};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Matrix::from_fn(rows, cols, |_, _| rng.gen_range(-1.0..1.0))
    }

    #[test]
    fn svd_reconstructs() {
        for &(m, n) in &[(7, 4), (4, 7), (6, 6), (1, 5)] {
            let a = random(m, n, (m * 10 + n) as u64);
            let svd = jacobi_svd(&a).unwrap();
            let us = Matrix::from_fn(svd.u.rows(), svd.u.cols(), |i, j| svd.u[(i, j)] * svd.sigma[j]);
            let back = matmul(&us, &svd.v.transpose()).unwrap();
            assert!(frobenius_norm(&back.sub(&a).unwrap()) < 1e-12, "{m}x{n}");
            assert!(svd.sigma.windows(2).all(|w| w[0] >= w[1]));
        }
    }

    #[test]
    fn polar_of_orthogonal_is_itself() {
        let th: f64 = 0.7;
        let r = Matrix::from_rows(&[vec![th.cos(), -th.sin()], vec![th.sin(), th.cos()]]).unwrap();
        let p = polar_factor_oracle(&r).unwrap();
        assert!(frobenius_norm(&p.sub(&r).unwrap()) < 1e-14);
    }

    #[test]
    fn polar_of_positive_diagonal_is_identity() {
        let p = polar_factor_oracle(&Matrix::diag(&[3.0, 0.5])).unwrap();
        assert!(frobenius_norm(&p.sub(&Matrix::identity(2)).unwrap()) < 1e-14);
    }

    #[test]
    fn polar_recovers_rotation_factor() {
        // u = R diag(2, 1): SVD factors are P = R, Σ = diag(2,1), Q = I.
        let th: f64 = -1.1;
        let r = Matrix::from_rows(&[vec![th.cos(), -th.sin()], vec![th.sin(), th.cos()]]).unwrap();
        let u = matmul(&r, &Matrix::diag(&[2.0, 1.0])).unwrap();
        let p = polar_factor_oracle(&u).unwrap();
        assert!(frobenius_norm(&p.sub(&r).unwrap()) < 1e-12);
    }

    #[test]
    fn polar_is_semi_orthogonal_for_tall() {
        let u = random(40, 12, 5);
        let p = polar_factor_oracle(&u).unwrap();
        let gram = matmul(&p.transpose(), &p).unwrap();
        assert!(frobenius_norm(&gram.sub(&Matrix::identity(12)).unwrap()) < 1e-10);
    }

    #[test]
    fn polar_limits() {
        assert!(matches!(
            polar_factor_oracle(&Matrix::zeros(65, 65)),
            Err(Error::OracleLimit(_))
        ));
        assert!(matches!(
            polar_factor_oracle(&Matrix::zeros(3, 3)),
            Err(Error::ZeroMatrix { .. })
        ));
    }

    #[test]
    fn numerical_rank_of_low_rank_product() {
        let a = matmul(&random(10, 3, 1), &random(3, 8, 2)).unwrap();
        assert_eq!(numerical_rank(&a, 1e-10).unwrap(), 3);
    }
}
