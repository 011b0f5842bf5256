//! Analytic signed distance fields and the dual-scale surface sampler.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const SIGMA2_FINE: f64 = 2e-6;
pub const SIGMA2_COARSE: f64 = 2e-2;
pub const LAMBDA_SDF: f64 = 0.01;

pub type Point = [f64; 3];

#[derive(Debug, Clone, PartialEq)]
pub enum Shape {
    Sphere { center: Point, radius: f64 },
    /// Torus around the z axis through `center`.
    Torus { center: Point, major: f64, minor: f64 },
    Box { center: Point, half: Point },
    Union(Box<Shape>, Box<Shape>),
    /// Points in the first shape but not the second.
    Difference(Box<Shape>, Box<Shape>),
}

fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn norm(a: Point) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

impl Shape {
    pub fn sphere(radius: f64) -> Self {
        Shape::Sphere {
            center: [0.0; 3],
            radius,
        }
    }

    /// A sphere of radius 0.35 at `(-0.35, 0, 0)` joined with a torus
    /// (radii 0.4 / 0.15) centred at `(0.35, 0, 0)`.
    pub fn sphere_and_torus() -> Self {
        Shape::Union(
            Box::new(Shape::Sphere {
                center: [-0.35, 0.0, 0.0],
                radius: 0.35,
            }),
            Box::new(Shape::Torus {
                center: [0.35, 0.0, 0.0],
                major: 0.4,
                minor: 0.15,
            }),
        )
    }

    pub fn union(self, other: Shape) -> Self {
        Shape::Union(Box::new(self), Box::new(other))
    }

    pub fn difference(self, other: Shape) -> Self {
        Shape::Difference(Box::new(self), Box::new(other))
    }

    pub fn eval(&self, p: Point) -> f64 {
        self.eval_grad(p).0
    }

    /// Signed distance and its gradient (the gradient of the active branch at
    /// composite kinks).
    pub fn eval_grad(&self, p: Point) -> (f64, Point) {
        match self {
            Shape::Sphere { center, radius } => {
                let d = sub(p, *center);
                let n = norm(d);
                let g = if n > 0.0 { [d[0] / n, d[1] / n, d[2] / n] } else { [1.0, 0.0, 0.0] };
                (n - radius, g)
            }
            Shape::Torus { center, major, minor } => {
                let d = sub(p, *center);
                let rho = (d[0] * d[0] + d[1] * d[1]).sqrt();
                let q = rho - major;
                let len = (q * q + d[2] * d[2]).sqrt();
                if len == 0.0 {
                    return (-minor, [0.0, 0.0, 1.0]);
                }
                let (cx, cy) = if rho > 0.0 { (d[0] / rho, d[1] / rho) } else { (1.0, 0.0) };
                (len - minor, [q / len * cx, q / len * cy, d[2] / len])
            }
            Shape::Box { center, half } => {
                let d = sub(p, *center);
                let q: Point = [d[0].abs() - half[0], d[1].abs() - half[1], d[2].abs() - half[2]];
                let outside: Point = [q[0].max(0.0), q[1].max(0.0), q[2].max(0.0)];
                let out_len = norm(outside);
                let inner = q[0].max(q[1]).max(q[2]).min(0.0);
                if out_len > 0.0 {
                    let g = [
                        outside[0] / out_len * d[0].signum(),
                        outside[1] / out_len * d[1].signum(),
                        outside[2] / out_len * d[2].signum(),
                    ];
                    (out_len, g)
                } else {
                    let axis = (0..3).max_by(|&i, &j| q[i].total_cmp(&q[j])).unwrap();
                    let mut g = [0.0; 3];
                    g[axis] = if d[axis] >= 0.0 { 1.0 } else { -1.0 };
                    (inner, g)
                }
            }
            Shape::Union(a, b) => {
                let (fa, ga) = a.eval_grad(p);
                let (fb, gb) = b.eval_grad(p);
                if fa <= fb {
                    (fa, ga)
                } else {
                    (fb, gb)
                }
            }
            Shape::Difference(a, b) => {
                let (fa, ga) = a.eval_grad(p);
                let (fb, gb) = b.eval_grad(p);
                if fa >= -fb {
                    (fa, ga)
                } else {
                    (-fb, [-gb[0], -gb[1], -gb[2]])
                }
            }
        }
    }

    /// Values at the columns of a `3 x N` matrix, as a `1 x N` matrix.
    pub fn eval_batch(&self, points: &Matrix) -> Matrix {
        Matrix::from_fn(1, points.cols(), |_, j| self.eval([points[(0, j)], points[(1, j)], points[(2, j)]]))
    }

    /// Projects `p` onto the zero level set by Newton steps along the gradient.
    fn project(&self, mut p: Point) -> Option<Point> {
        for _ in 0..50 {
            let (f, g) = self.eval_grad(p);
            if f.abs() < 1e-12 {
                return Some(p);
            }
            let gg = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
            if gg == 0.0 {
                return None;
            }
            for k in 0..3 {
                p[k] -= f * g[k] / gg;
            }
        }
        None
    }

    /// A point on the surface, found by projecting uniform draws from `[-1, 1]³`.
    pub fn surface_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Point {
        loop {
            let start = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            if let Some(p) = self.project(start) {
                if p.iter().all(|v| v.abs() <= 1.0) && self.eval(p).abs() < 1e-9 {
                    return p;
                }
            }
        }
    }
}

/// One Laplace draw with scale `b = sqrt(variance / 2)`.
pub fn laplace<R: Rng + ?Sized>(variance: f64, rng: &mut R) -> f64 {
    let b = (variance / 2.0).sqrt();
    let u: f64 = rng.gen_range(-0.5..0.5);
    -b * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scale {
    Fine,
    Coarse,
}

/// Surface-perturbed samples with exact SDF labels.
#[derive(Debug, Clone)]
pub struct SdfBatch {
    /// `3 x N`.
    pub points: Matrix,
    /// `1 x N`.
    pub values: Matrix,
    pub scales: Vec<Scale>,
}

impl SdfBatch {
    pub fn split(&self) -> (Vec<usize>, Vec<usize>) {
        (0..self.scales.len()).partition(|&i| self.scales[i] == Scale::Fine)
    }
}

/// `n_fine` samples with per-coordinate Laplace noise of variance
/// [`SIGMA2_FINE`] followed by `n_coarse` with variance [`SIGMA2_COARSE`].
/// Perturbed points falling outside `[-1, 1]³` are redrawn.
pub fn sdf_sample<R: Rng + ?Sized>(shape: &Shape, n_fine: usize, n_coarse: usize, rng: &mut R) -> Result<SdfBatch> {
    if n_fine + n_coarse == 0 {
        return Err(Error::Config("sdf sampler needs at least one sample".into()));
    }
    let n = n_fine + n_coarse;
    let mut points = Matrix::zeros(3, n);
    let mut values = Matrix::zeros(1, n);
    let mut scales = Vec::with_capacity(n);
    for i in 0..n {
        let (scale, var) = if i < n_fine { (Scale::Fine, SIGMA2_FINE) } else { (Scale::Coarse, SIGMA2_COARSE) };
        let p = loop {
            let s = shape.surface_point(rng);
            let p = [s[0] + laplace(var, rng), s[1] + laplace(var, rng), s[2] + laplace(var, rng)];
            if p.iter().all(|v| v.abs() <= 1.0) {
                break p;
            }
        };
        for k in 0..3 {
            points[(k, i)] = p[k];
        }
        values[(0, i)] = shape.eval(p);
        scales.push(scale);
    }
    Ok(SdfBatch { points, values, scales })
}

/// `λ‖y_c − y_c*‖² + ‖y_f − y_f*‖²` and its gradients with respect to the fine
/// and coarse predictions.
pub fn sdf_loss(pred_fine: &Matrix, gt_fine: &Matrix, pred_coarse: &Matrix, gt_coarse: &Matrix) -> Result<(f64, Matrix, Matrix)> {
    if pred_fine.shape() != gt_fine.shape() || pred_coarse.shape() != gt_coarse.shape() {
        return Err(Error::shape(
            "sdf_loss",
            format!(
                "fine {:?}/{:?}, coarse {:?}/{:?}",
                pred_fine.shape(),
                gt_fine.shape(),
                pred_coarse.shape(),
                gt_coarse.shape()
            ),
        ));
    }
    let rf = pred_fine.sub(gt_fine)?;
    let rc = pred_coarse.sub(gt_coarse)?;
    let loss = LAMBDA_SDF * rc.sum_squares() + rf.sum_squares();
    Ok((loss, rf.scale(2.0), rc.scale(2.0 * LAMBDA_SDF)))
}
