use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::net::Network;
use crate::tasks::{ImageSignal, Shape};

/// Decibel values are clamped to `±DB_CAP`; identical signals report the cap.
pub const DB_CAP: f64 = 100.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const SSIM_C1: f64 = 0.01 * 0.01;
const SSIM_C2: f64 = 0.03 * 0.03;

fn db(ratio: f64) -> f64 {
    if ratio.is_nan() {
        return -DB_CAP;
    }
    (10.0 * ratio.log10()).clamp(-DB_CAP, DB_CAP)
}

fn same_len(op: &'static str, a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::shape(op, format!("{a} vs {b} values")));
    }
    if a == 0 {
        return Err(Error::EmptyInput(format!("{op} of empty signals")));
    }
    Ok(())
}

/// `10·log10(peak² / MSE)` with `pred` clamped to `[0, peak]`.
pub fn psnr(pred: &[f64], gt: &[f64], peak: f64) -> Result<f64> {
    same_len("psnr", pred.len(), gt.len())?;
    let mse = pred
        .iter()
        .zip(gt)
        .map(|(p, g)| (p.clamp(0.0, peak) - g).powi(2))
        .sum::<f64>()
        / pred.len() as f64;
    if mse == 0.0 {
        return Ok(DB_CAP);
    }
    Ok(db(peak * peak / mse))
}

pub fn psnr_image(pred: &ImageSignal, gt: &ImageSignal) -> Result<f64> {
    if pred.dims() != gt.dims() {
        return Err(Error::shape("psnr", format!("{:?} vs {:?}", pred.dims(), gt.dims())));
    }
    psnr(pred.data(), gt.data(), 1.0)
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let w: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| (-(i as f64 - half).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable valid-mode filtering with the normalized Gaussian window.
fn filter_valid(m: &Matrix, w: &[f64]) -> Matrix {
    let k = w.len();
    let (h, wd) = m.shape();
    let rows = Matrix::from_fn(h, wd - k + 1, |r, c| (0..k).map(|t| w[t] * m[(r, c + t)]).sum());
    Matrix::from_fn(h - k + 1, wd - k + 1, |r, c| (0..k).map(|t| w[t] * rows[(r + t, c)]).sum())
}

/// Mean SSIM of two single-channel images with dynamic range 1.
pub fn ssim_gray(pred: &Matrix, gt: &Matrix) -> Result<f64> {
    if pred.shape() != gt.shape() {
        return Err(Error::shape("ssim", format!("{:?} vs {:?}", pred.shape(), gt.shape())));
    }
    if pred.rows() < SSIM_WINDOW || pred.cols() < SSIM_WINDOW {
        return Err(Error::shape(
            "ssim",
            format!("image {:?} smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} window", pred.shape()),
        ));
    }
    let w = gaussian_window();
    let mx = filter_valid(pred, &w);
    let my = filter_valid(gt, &w);
    let mxx = filter_valid(&pred.hadamard(pred)?, &w);
    let myy = filter_valid(&gt.hadamard(gt)?, &w);
    let mxy = filter_valid(&pred.hadamard(gt)?, &w);
    let n = mx.len() as f64;
    let mut total = 0.0;
    for i in 0..mx.len() {
        let (ux, uy) = (mx.data()[i], my.data()[i]);
        let vx = mxx.data()[i] - ux * ux;
        let vy = myy.data()[i] - uy * uy;
        let cxy = mxy.data()[i] - ux * uy;
        total += ((2.0 * ux * uy + SSIM_C1) * (2.0 * cxy + SSIM_C2)) / ((ux * ux + uy * uy + SSIM_C1) * (vx + vy + SSIM_C2));
    }
    Ok(total / n)
}

/// SSIM averaged over channels.
pub fn ssim(pred: &ImageSignal, gt: &ImageSignal) -> Result<f64> {
    if pred.dims() != gt.dims() {
        return Err(Error::shape("ssim", format!("{:?} vs {:?}", pred.dims(), gt.dims())));
    }
    let c = gt.channels();
    let mut total = 0.0;
    for ch in 0..c {
        total += ssim_gray(&pred.channel(ch), &gt.channel(ch))?;
    }
    Ok(total / c as f64)
}

/// `10·log10(‖gt‖² / ‖gt − pred‖²)`.
pub fn snr(pred: &[f64], gt: &[f64]) -> Result<f64> {
    same_len("snr", pred.len(), gt.len())?;
    let signal: f64 = gt.iter().map(|g| g * g).sum();
    if signal == 0.0 {
        return Err(Error::Config("snr undefined for an all-zero reference".into()));
    }
    let noise: f64 = pred.iter().zip(gt).map(|(p, g)| (g - p).powi(2)).sum();
    if noise == 0.0 {
        return Ok(DB_CAP);
    }
    Ok(db(signal / noise))
}

/// Scale-invariant SNR on zero-mean signals: the target is the projection of
/// `pred` onto `gt`.
pub fn si_snr(pred: &[f64], gt: &[f64]) -> Result<f64> {
    same_len("si_snr", pred.len(), gt.len())?;
    let centre = |x: &[f64]| {
        let m = x.iter().sum::<f64>() / x.len() as f64;
        x.iter().map(|v| v - m).collect::<Vec<f64>>()
    };
    let (p, g) = (centre(pred), centre(gt));
    let gg: f64 = g.iter().map(|v| v * v).sum();
    let energy: f64 = gt.iter().map(|v| v * v).sum();
    // centring a constant leaves only rounding residue
    if gg <= 1e-24 * energy || gg == 0.0 {
        return Err(Error::Config("si-snr undefined for a constant reference".into()));
    }
    let alpha = p.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() / gg;
    let target: f64 = alpha * alpha * gg;
    let noise: f64 = p.iter().zip(&g).map(|(a, b)| (a - alpha * b).powi(2)).sum();
    if noise == 0.0 {
        return Ok(DB_CAP);
    }
    Ok(db(target / noise))
}

/// Cell centres of a `res³` grid over `[-1, 1]³`, `3 x res³`.
pub fn occupancy_grid(res: usize) -> Matrix {
    let c = |i: usize| -1.0 + (2 * i + 1) as f64 / res as f64;
    Matrix::from_fn(3, res * res * res, |d, p| {
        let (i, j, k) = (p / (res * res), (p / res) % res, p % res);
        c([i, j, k][d])
    })
}

/// IoU of `{field < 0}` against `{shape < 0}` over a `res³` grid. `field`
/// maps `3 x N` points to `1 x N` values.
pub fn occupancy_iou_with(field: impl Fn(&Matrix) -> Result<Matrix>, shape: &Shape, res: usize) -> Result<f64> {
    if res == 0 {
        return Err(Error::Config("grid resolution must be >= 1".into()));
    }
    let grid = occupancy_grid(res);
    let total = grid.cols();
    let chunk = 8192;
    let (mut inter, mut union) = (0usize, 0usize);
    for start in (0..total).step_by(chunk) {
        let pts = grid.columns(start, (start + chunk).min(total));
        let pred = field(&pts)?;
        if pred.shape() != (1, pts.cols()) {
            return Err(Error::shape("occupancy_iou", format!("field returned {:?}", pred.shape())));
        }
        let gt = shape.eval_batch(&pts);
        for j in 0..pts.cols() {
            let (a, b) = (pred[(0, j)] < 0.0, gt[(0, j)] < 0.0);
            inter += (a && b) as usize;
            union += (a || b) as usize;
        }
    }
    if union == 0 {
        return Err(Error::EmptyInput("occupancy IoU with empty union".into()));
    }
    Ok(inter as f64 / union as f64)
}

pub fn occupancy_iou(net: &Network, shape: &Shape, res: usize) -> Result<f64> {
    occupancy_iou_with(|p| net.predict(p), shape, res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_vec(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()
    }

    #[test]
    fn psnr_examples() {
        let gt = rand_vec(50, 1);
        assert_eq!(psnr(&gt, &gt, 1.0).unwrap(), DB_CAP);
        let z = vec![0.0; 10];
        assert!((psnr(&vec![0.1; 10], &z, 1.0).unwrap() - 20.0).abs() < 1e-12);

        let pred = rand_vec(50, 2);
        let mse: f64 = pred.iter().zip(&gt).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / 50.0;
        assert!((psnr(&pred, &gt, 1.0).unwrap() - 10.0 * (1.0 / mse).log10()).abs() < 1e-12);
        assert!(psnr(&pred, &gt[..3], 1.0).is_err());
    }

    #[test]
    fn psnr_decreases_with_perturbation() {
        let gt = rand_vec(64, 3);
        let dir = rand_vec(64, 4);
        let mut last = f64::INFINITY;
        for s in [0.001, 0.01, 0.05, 0.1, 0.3] {
            let pred: Vec<f64> = gt.iter().zip(&dir).map(|(g, d)| g + s * (d - 0.5)).collect();
            let v = psnr(&pred, &gt, 1.0).unwrap();
            assert!(v < last);
            last = v;
        }
    }

    /// Direct per-window evaluation with a 2-D kernel.
    fn ssim_oracle(x: &Matrix, y: &Matrix) -> f64 {
        let g = gaussian_window();
        let k = SSIM_WINDOW;
        let (h, w) = x.shape();
        let mut total = 0.0;
        let mut count = 0.0;
        for r in 0..=h - k {
            for c in 0..=w - k {
                let (mut ux, mut uy, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
                for i in 0..k {
                    for j in 0..k {
                        let wt = g[i] * g[j];
                        let (a, b) = (x[(r + i, c + j)], y[(r + i, c + j)]);
                        ux += wt * a;
                        uy += wt * b;
                        xx += wt * a * a;
                        yy += wt * b * b;
                        xy += wt * a * b;
                    }
                }
                let (vx, vy, cxy) = (xx - ux * ux, yy - uy * uy, xy - ux * uy);
                total += ((2.0 * ux * uy + SSIM_C1) * (2.0 * cxy + SSIM_C2))
                    / ((ux * ux + uy * uy + SSIM_C1) * (vx + vy + SSIM_C2));
                count += 1.0;
            }
        }
        total / count
    }

    #[test]
    fn ssim_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tex = Matrix::from_fn(20, 17, |_, _| rng.gen_range(0.0..1.0));
        assert!((ssim_gray(&tex, &tex).unwrap() - 1.0).abs() < 1e-12);

        let binary = Matrix::from_fn(16, 16, |r, c| ((r / 2 + c / 3) % 2) as f64);
        let inv = binary.map(|v| 1.0 - v);
        assert!(ssim_gray(&inv, &binary).unwrap() < 0.0);

        let flat = Matrix::filled(20, 17, 0.4);
        let got = ssim_gray(&flat, &tex).unwrap();
        assert!((got - ssim_oracle(&flat, &tex)).abs() < 1e-10);

        let other = Matrix::from_fn(20, 17, |_, _| rng.gen_range(0.0..1.0));
        assert!((ssim_gray(&tex, &other).unwrap() - ssim_gray(&other, &tex).unwrap()).abs() < 1e-12);
        assert!((ssim_gray(&tex, &other).unwrap() - ssim_oracle(&tex, &other)).abs() < 1e-10);

        assert!(ssim_gray(&Matrix::zeros(10, 30), &Matrix::zeros(10, 30)).is_err());
    }

    #[test]
    fn ssim_rgb_averages_channels() {
        let a = ImageSignal::from_fn(12, 12, 3, |r, c, k| ((r * 12 + c + k * 5) % 7) as f64 / 6.0).unwrap();
        let b = ImageSignal::from_fn(12, 12, 3, |r, c, k| ((r + c * 3 + k) % 5) as f64 / 4.0).unwrap();
        let expected: f64 = (0..3).map(|k| ssim_gray(&a.channel(k), &b.channel(k)).unwrap()).sum::<f64>() / 3.0;
        assert_eq!(ssim(&a, &b).unwrap(), expected);
    }

    #[test]
    fn snr_examples() {
        let n = 256;
        let gt: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        assert_eq!(snr(&gt, &gt).unwrap(), DB_CAP);
        assert_eq!(si_snr(&gt, &gt).unwrap(), DB_CAP);

        let mean = gt.iter().sum::<f64>() / n as f64;
        let zm: Vec<f64> = gt.iter().map(|v| v - mean).collect();
        let twice: Vec<f64> = zm.iter().map(|v| 2.0 * v).collect();
        assert!(snr(&twice, &zm).unwrap().abs() < 1e-12);
        assert_eq!(si_snr(&twice, &zm).unwrap(), DB_CAP);

        // orthogonal noise scaled to a tenth of the signal norm
        let raw: Vec<f64> = (0..n).map(|i| (i as f64 * 1.7).cos()).collect();
        let proj = raw.iter().zip(&gt).map(|(a, b)| a * b).sum::<f64>() / gt.iter().map(|v| v * v).sum::<f64>();
        let orth: Vec<f64> = raw.iter().zip(&gt).map(|(a, b)| a - proj * b).collect();
        let scale = (gt.iter().map(|v| v * v).sum::<f64>() / orth.iter().map(|v| v * v).sum::<f64>()).sqrt() / 10.0;
        let noisy: Vec<f64> = gt.iter().zip(&orth).map(|(g, o)| g + scale * o).collect();
        assert!((snr(&noisy, &gt).unwrap() - 20.0).abs() < 1e-9);

        assert!(snr(&gt, &vec![0.0; n]).is_err());
        assert!(si_snr(&gt, &vec![0.3; n]).is_err());
    }

    #[test]
    fn si_snr_is_scale_invariant() {
        let gt = rand_vec(100, 6);
        let pred = rand_vec(100, 7);
        let base = si_snr(&pred, &gt).unwrap();
        for c in [1e-3, 0.5, 3.0, 1e4] {
            let scaled: Vec<f64> = pred.iter().map(|v| c * v).collect();
            assert!((si_snr(&scaled, &gt).unwrap() - base).abs() < 1e-9);
        }
    }

    #[test]
    fn iou_examples() {
        let s = Shape::sphere(0.5);
        let exact = occupancy_iou_with(|p| Ok(s.eval_batch(p)), &s, 32).unwrap();
        assert_eq!(exact, 1.0);
        assert_eq!(occupancy_iou_with(|p| Ok(Matrix::filled(1, p.cols(), 1.0)), &s, 16).unwrap(), 0.0);

        let big = Shape::sphere(0.5 * 2f64.cbrt());
        let iou = occupancy_iou_with(|p| Ok(big.eval_batch(p)), &s, 128).unwrap();
        assert!((iou - 0.5).abs() < 2.0 / 128.0, "{iou}");

        let empty = Shape::Sphere {
            center: [5.0, 5.0, 5.0],
            radius: 0.1,
        };
        assert!(occupancy_iou_with(|p| Ok(Matrix::filled(1, p.cols(), 1.0)), &empty, 8).is_err());
    }
}
