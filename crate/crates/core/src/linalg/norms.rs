use super::{matmul_nt, matmul_tn, Matrix};
use crate::error::{Error, Result};

/// Default tolerance and iteration cap used by [`stable_rank`].
pub const POWER_TOL: f64 = 1e-12;
pub const POWER_MAX_ITER: usize = 10_000;

pub fn frobenius_norm(a: &Matrix) -> f64 {
    a.sum_squares().sqrt()
}

/// Result of power iteration on `AᵀA`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Largest singular value by power iteration on `AᵀA`, started from the
/// normalized all-ones vector. Stops once the estimate changes by less than
/// `tol` relative; otherwise returns the last estimate with `converged: false`.
pub fn spectral_norm(a: &Matrix, tol: f64, max_iter: usize) -> SpectralEstimate {
    let (m, n) = a.shape();
    if m == 0 || n == 0 || a.is_zero() {
        return SpectralEstimate {
            value: 0.0,
            iterations: 0,
            converged: true,
        };
    }
    // Iterate in the smaller dimension.
    let (op, dim) = if n <= m {
        (Orientation::Normal, n)
    } else {
        (Orientation::Transposed, m)
    };
    // Very rectangular inputs: form the small Gram matrix once.
    let gram = if m.max(n) > 2 * dim {
        let g = match op {
            Orientation::Normal => matmul_tn(a, a),
            Orientation::Transposed => matmul_nt(a, a),
        };
        Some(g.expect("gram shapes agree"))
    } else {
        None
    };
    let operator = match &gram {
        Some(g) => Operator::Gram(g),
        None => Operator::Direct(a, op),
    };
    let ones = vec![1.0; dim];
    match power_iterate(operator, ones, tol, max_iter) {
        Some(est) => est,
        None => {
            // All-ones start lies in the null space; restart from the
            // coordinate direction with the largest image.
            let image_norms: Vec<f64> = match op {
                Orientation::Normal => (0..dim).map(|j| norm(&a.col(j))).collect(),
                Orientation::Transposed => (0..dim).map(|i| norm(a.row(i))).collect(),
            };
            let best = (0..dim)
                .max_by(|&i, &j| image_norms[i].total_cmp(&image_norms[j]))
                .unwrap_or(0);
            let mut e = vec![0.0; dim];
            e[best] = 1.0;
            power_iterate(operator, e, tol, max_iter).expect("non-zero matrix has a non-null coordinate")
        }
    }
}

#[derive(Clone, Copy)]
enum Operator<'a> {
    Direct(&'a Matrix, Orientation),
    Gram(&'a Matrix),
}

impl Operator<'_> {
    /// `(‖Av‖², AᵀAv)`.
    fn step(self, v: &[f64]) -> (f64, Vec<f64>) {
        match self {
            Operator::Direct(a, op) => {
                let av = op.apply(a, v);
                (sum_sq(&av), op.apply_adjoint(a, &av))
            }
            Operator::Gram(g) => {
                let w = mat_vec(g, v);
                let q = v.iter().zip(&w).map(|(x, y)| x * y).sum::<f64>();
                (q.max(0.0), w)
            }
        }
    }
}

fn power_iterate(
    op: Operator<'_>,
    mut v: Vec<f64>,
    tol: f64,
    max_iter: usize,
) -> Option<SpectralEstimate> {
    // v is kept scaled to unit max-abs entry; the estimate is the Rayleigh
    // quotient sqrt(‖Av‖² / ‖v‖²), exact for the all-ones start on Iₙ.
    let mut sigma = 0.0;
    for it in 1..=max_iter {
        let (av2, mut w) = op.step(&v);
        let next = (av2 / sum_sq(&v)).sqrt();
        if next == 0.0 {
            return None;
        }
        let wmax = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        w.iter_mut().for_each(|x| *x /= wmax);
        v = w;
        if (next - sigma).abs() <= tol * next {
            return Some(SpectralEstimate {
                value: next,
                iterations: it,
                converged: true,
            });
        }
        sigma = next;
    }
    Some(SpectralEstimate {
        value: sigma,
        iterations: max_iter,
        converged: false,
    })
}

/// Stable rank `‖A‖²_F / ‖A‖²₂`.
pub fn stable_rank(a: &Matrix) -> Result<f64> {
    let sigma = spectral_norm(a, POWER_TOL, POWER_MAX_ITER).value;
    if sigma == 0.0 {
        return Err(Error::ZeroMatrix { op: "stable_rank" });
    }
    let fro2 = a.sum_squares();
    Ok(fro2 / (sigma * sigma))
}

#[derive(Clone, Copy)]
enum Orientation {
    /// v has length cols; A v
    Normal,
    /// v has length rows; Aᵀ v
    Transposed,
}

impl Orientation {
    fn apply(self, a: &Matrix, v: &[f64]) -> Vec<f64> {
        match self {
            Orientation::Normal => mat_vec(a, v),
            Orientation::Transposed => mat_t_vec(a, v),
        }
    }

    fn apply_adjoint(self, a: &Matrix, v: &[f64]) -> Vec<f64> {
        match self {
            Orientation::Normal => mat_t_vec(a, v),
            Orientation::Transposed => mat_vec(a, v),
        }
    }
}

fn mat_vec(a: &Matrix, v: &[f64]) -> Vec<f64> {
    (0..a.rows())
        .map(|i| a.row(i).iter().zip(v).map(|(x, y)| x * y).sum())
        .collect()
}

fn mat_t_vec(a: &Matrix, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.cols()];
    for (i, &vi) in v.iter().enumerate() {
        for (o, &x) in out.iter_mut().zip(a.row(i)) {
            *o += x * vi;
        }
    }
    out
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn norm(v: &[f64]) -> f64 {
    sum_sq(v).sqrt()
}
