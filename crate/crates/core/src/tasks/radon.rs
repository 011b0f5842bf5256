//! Parallel-beam Radon transform with bilinear ray sampling, and its adjoint.
//!
//! Pixel `(r, c)` of an `H x W` image sits at `x = c - (W-1)/2`,
//! `y = r - (H-1)/2`. For angle `θ` and detector offset `t`, the ray is
//! `t·(cos θ, sin θ) + s·(-sin θ, cos θ)`, sampled at `s = (k - (K-1)/2)·Δs`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub const RAY_STEP: f64 = 0.5;
pub const DEFAULT_ANGLES: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct RadonGeometry {
    pub height: usize,
    pub width: usize,
    pub angles: Vec<f64>,
    pub detectors: usize,
}

impl RadonGeometry {
    /// `n_angles` uniform angles in `[0, π)` and the smallest odd detector
    /// count covering the image diagonal, so that a central detector exists.
    pub fn new(height: usize, width: usize, n_angles: usize) -> Result<Self> {
        if height == 0 || width == 0 || n_angles == 0 {
            return Err(Error::Config("radon geometry needs non-empty image and at least one angle".into()));
        }
        let angles = (0..n_angles).map(|i| PI * i as f64 / n_angles as f64).collect();
        let mut detectors = diagonal(height, width).ceil() as usize;
        if detectors % 2 == 0 {
            detectors += 1;
        }
        Ok(Self {
            height,
            width,
            angles,
            detectors,
        })
    }

    pub fn with_angles(height: usize, width: usize, angles: Vec<f64>, detectors: usize) -> Result<Self> {
        if height == 0 || width == 0 || angles.is_empty() || detectors == 0 {
            return Err(Error::Config("radon geometry needs non-empty image, angles and detectors".into()));
        }
        Ok(Self {
            height,
            width,
            angles,
            detectors,
        })
    }

    pub fn sinogram_shape(&self) -> (usize, usize) {
        (self.angles.len(), self.detectors)
    }

    fn ray_samples(&self) -> usize {
        (diagonal(self.height, self.width) / RAY_STEP).ceil() as usize + 1
    }

    /// Calls `f(pixel_index, weight)` for every bilinear tap of ray `(a, j)`,
    /// already scaled by `Δs`.
    fn for_each_tap(&self, a: usize, j: usize, mut f: impl FnMut(usize, f64)) {
        let (h, w) = (self.height, self.width);
        let (sin, cos) = self.angles[a].sin_cos();
        let t = j as f64 - (self.detectors as f64 - 1.0) / 2.0;
        let k_total = self.ray_samples();
        let cx = (w as f64 - 1.0) / 2.0;
        let cy = (h as f64 - 1.0) / 2.0;
        for k in 0..k_total {
            let s = (k as f64 - (k_total as f64 - 1.0) / 2.0) * RAY_STEP;
            let col = t * cos - s * sin + cx;
            let row = t * sin + s * cos + cy;
            if col <= -1.0 || row <= -1.0 || col >= w as f64 || row >= h as f64 {
                continue;
            }
            let c0 = col.floor();
            let r0 = row.floor();
            let (fc, fr) = (col - c0, row - r0);
            let (c0, r0) = (c0 as isize, r0 as isize);
            for (dr, wr) in [(0isize, 1.0 - fr), (1, fr)] {
                for (dc, wc) in [(0isize, 1.0 - fc), (1, fc)] {
                    let (rr, cc) = (r0 + dr, c0 + dc);
                    if rr < 0 || cc < 0 || rr >= h as isize || cc >= w as isize {
                        continue;
                    }
                    let wgt = wr * wc;
                    if wgt != 0.0 {
                        f(rr as usize * w + cc as usize, wgt * RAY_STEP);
                    }
                }
            }
        }
    }

    /// Sinogram (`angles x detectors`) of an `H x W` image.
    pub fn forward(&self, image: &Matrix) -> Result<Matrix> {
        if image.shape() != (self.height, self.width) {
            return Err(Error::shape(
                "radon_forward",
                format!("image {:?}, geometry {}x{}", image.shape(), self.height, self.width),
            ));
        }
        let px = image.data();
        let (na, nd) = self.sinogram_shape();
        let mut out = Matrix::zeros(na, nd);
        for a in 0..na {
            for j in 0..nd {
                let mut acc = 0.0;
                self.for_each_tap(a, j, |p, w| acc += w * px[p]);
                out[(a, j)] = acc;
            }
        }
        Ok(out)
    }

    /// Exact adjoint of [`RadonGeometry::forward`].
    pub fn adjoint(&self, sinogram: &Matrix) -> Result<Matrix> {
        if sinogram.shape() != self.sinogram_shape() {
            return Err(Error::shape(
                "radon_adjoint",
                format!("sinogram {:?}, expected {:?}", sinogram.shape(), self.sinogram_shape()),
            ));
        }
        let mut out = Matrix::zeros(self.height, self.width);
        let (na, nd) = self.sinogram_shape();
        let px = out.data_mut();
        for a in 0..na {
            for j in 0..nd {
                let y = sinogram[(a, j)];
                if y != 0.0 {
                    self.for_each_tap(a, j, |p, w| px[p] += w * y);
                }
            }
        }
        Ok(out)
    }
}

fn diagonal(h: usize, w: usize) -> f64 {
    ((h * h + w * w) as f64).sqrt()
}

pub fn radon_forward(image: &Matrix, geometry: &RadonGeometry) -> Result<Matrix> {
    geometry.forward(image)
}

pub fn radon_adjoint(sinogram: &Matrix, geometry: &RadonGeometry) -> Result<Matrix> {
    geometry.adjoint(sinogram)
}

/// An ellipse `(value, a, b, x0, y0, φ°)` in normalized `[-1, 1]²` coordinates.
type Ellipse = (f64, f64, f64, f64, f64, f64);

/// Modified Shepp-Logan (Toft) ellipses; intensities sum to values in `[0, 1]`.
const SHEPP_LOGAN: [Ellipse; 10] = [
    (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
    (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
    (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
    (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
    (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
    (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
    (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
    (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
    (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
    (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
];

/// `n x n` Shepp-Logan-style ellipse phantom with values in `[0, 1]`.
pub fn shepp_logan(n: usize) -> Matrix {
    Matrix::from_fn(n, n, |r, c| {
        let x = pixel_centre(c, n);
        let y = -pixel_centre(r, n);
        let v: f64 = SHEPP_LOGAN
            .iter()
            .filter(|e| inside(e, x, y))
            .map(|e| e.0)
            .sum();
        v.clamp(0.0, 1.0)
    })
}

/// `n x n` image equal to `value` inside a centred disk of radius `radius` (in
/// normalized units) and 0 elsewhere.
pub fn disk_phantom(n: usize, radius: f64, value: f64) -> Matrix {
    Matrix::from_fn(n, n, |r, c| {
        let (x, y) = (pixel_centre(c, n), pixel_centre(r, n));
        if x * x + y * y <= radius * radius {
            value
        } else {
            0.0
        }
    })
}

fn pixel_centre(i: usize, n: usize) -> f64 {
    (2.0 * i as f64 + 1.0) / n as f64 - 1.0
}

fn inside(e: &Ellipse, x: f64, y: f64) -> bool {
    let (_, a, b, x0, y0, phi) = *e;
    let (s, c) = phi.to_radians().sin_cos();
    let (dx, dy) = (x - x0, y - y0);
    let u = dx * c + dy * s;
    let v = -dx * s + dy * c;
    (u / a).powi(2) + (v / b).powi(2) <= 1.0
}
