//! Ground-truth signals, forward operators and losses for the experiment families.

mod audio;
mod image;
mod radon;
mod sdf;

pub use self::image::{grid_coords, ImageSignal};
pub use audio::AudioSignal;
pub use radon::{disk_phantom, radon_adjoint, radon_forward, shepp_logan, RadonGeometry, DEFAULT_ANGLES, RAY_STEP};
pub use sdf::{laplace, sdf_loss, sdf_sample, Point, Scale, SdfBatch, Shape, LAMBDA_SDF, SIGMA2_COARSE, SIGMA2_FINE};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Block-mean downsampling by `factor` in both directions, per channel.
pub fn downsample(image: &ImageSignal, factor: usize) -> Result<ImageSignal> {
    let (h, w, _) = image.dims();
    let targets = downsample_targets(&image.to_targets(), h, w, factor)?;
    ImageSignal::from_targets(h / factor, w / factor, &targets)
}

/// Block replication, the transpose of [`downsample`] up to `1/factor²`.
pub fn upsample_nearest(image: &ImageSignal, factor: usize) -> Result<ImageSignal> {
    if factor == 0 {
        return Err(Error::Config("upsampling factor must be >= 1".into()));
    }
    let (h, w, c) = image.dims();
    ImageSignal::from_fn(h * factor, w * factor, c, |r, col, k| image.get(r / factor, col / factor, k))
}

/// Block means of `C x (H·W)` pixel columns, giving `C x (H/f · W/f)`.
pub fn downsample_targets(t: &Matrix, height: usize, width: usize, factor: usize) -> Result<Matrix> {
    if factor == 0 || height % factor != 0 || width % factor != 0 {
        return Err(Error::Config(format!(
            "image {height}x{width} is not divisible by downsampling factor {factor}"
        )));
    }
    if t.cols() != height * width {
        return Err(Error::shape("downsample", format!("{} columns for {height}x{width}", t.cols())));
    }
    let (lh, lw) = (height / factor, width / factor);
    let inv = 1.0 / (factor * factor) as f64;
    let mut out = Matrix::zeros(t.rows(), lh * lw);
    for ch in 0..t.rows() {
        let src = t.row(ch);
        let dst = out.row_mut(ch);
        for r in 0..height {
            for c in 0..width {
                dst[(r / factor) * lw + c / factor] += src[r * width + c];
            }
        }
        dst.iter_mut().for_each(|v| *v *= inv);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskKind {
    Image,
    Audio,
    Ct,
    Sisr,
    Sdf,
}

impl TaskKind {
    pub fn name(&self) -> &'static str {
        match self {
            TaskKind::Image => "image",
            TaskKind::Audio => "audio",
            TaskKind::Ct => "ct",
            TaskKind::Sisr => "sisr",
            TaskKind::Sdf => "sdf",
        }
    }
}

#[derive(Debug, Clone)]
pub enum Task {
    Image {
        image: ImageSignal,
    },
    Audio {
        audio: AudioSignal,
        /// Coordinates span `[-extent, extent]`.
        extent: f64,
    },
    Ct {
        phantom: Matrix,
        geometry: RadonGeometry,
        sinogram: Matrix,
    },
    Sisr {
        high_res: ImageSignal,
        low_res: ImageSignal,
        factor: usize,
    },
    Sdf {
        shape: Shape,
        n_fine: usize,
        n_coarse: usize,
    },
}

impl Task {
    pub fn ct(phantom: Matrix, n_angles: usize) -> Result<Self> {
        let geometry = RadonGeometry::new(phantom.rows(), phantom.cols(), n_angles)?;
        let sinogram = geometry.forward(&phantom)?;
        Ok(Task::Ct {
            phantom,
            geometry,
            sinogram,
        })
    }

    pub fn sisr(high_res: ImageSignal, factor: usize) -> Result<Self> {
        let low_res = downsample(&high_res, factor)?;
        Ok(Task::Sisr {
            high_res,
            low_res,
            factor,
        })
    }

    pub fn kind(&self) -> TaskKind {
        match self {
            Task::Image { .. } => TaskKind::Image,
            Task::Audio { .. } => TaskKind::Audio,
            Task::Ct { .. } => TaskKind::Ct,
            Task::Sisr { .. } => TaskKind::Sisr,
            Task::Sdf { .. } => TaskKind::Sdf,
        }
    }

    pub fn in_dim(&self) -> usize {
        match self {
            Task::Audio { .. } => 1,
            Task::Sdf { .. } => 3,
            _ => 2,
        }
    }

    pub fn out_dim(&self) -> usize {
        match self {
            Task::Image { image } => image.channels(),
            Task::Sisr { high_res, .. } => high_res.channels(),
            _ => 1,
        }
    }

    /// The fixed coordinate set the network is evaluated on; `None` for SDF,
    /// which samples fresh points.
    pub fn coords(&self) -> Option<Matrix> {
        match self {
            Task::Image { image } => Some(grid_coords(image.height(), image.width())),
            Task::Audio { audio, extent } => Some(audio.coords(*extent)),
            Task::Ct { phantom, .. } => Some(grid_coords(phantom.rows(), phantom.cols())),
            Task::Sisr { high_res, .. } => Some(grid_coords(high_res.height(), high_res.width())),
            Task::Sdf { .. } => None,
        }
    }

    /// Training loss for the fixed-coordinate tasks.
    pub fn loss(&self) -> Result<TaskLoss> {
        make_task_loss(self)
    }
}

/// A loss over network outputs with its output gradient.
#[derive(Debug, Clone)]
pub enum TaskLoss {
    /// Mean squared error against `target`.
    Mse { target: Matrix },
    /// `‖A f − y‖²` with `f` the `1 x (H·W)` prediction.
    Ct { geometry: RadonGeometry, sinogram: Matrix },
    /// Mean squared error between the block-mean of the prediction and the
    /// low-resolution targets.
    Sisr {
        height: usize,
        width: usize,
        factor: usize,
        target: Matrix,
    },
    /// Dual-scale SDF loss on one sampled batch.
    Sdf { values: Matrix, scales: Vec<Scale> },
}

pub fn make_task_loss(task: &Task) -> Result<TaskLoss> {
    Ok(match task {
        Task::Image { image } => TaskLoss::Mse {
            target: image.to_targets(),
        },
        Task::Audio { audio, .. } => TaskLoss::Mse {
            target: audio.to_targets(),
        },
        Task::Ct { geometry, sinogram, .. } => TaskLoss::Ct {
            geometry: geometry.clone(),
            sinogram: sinogram.clone(),
        },
        Task::Sisr {
            high_res,
            low_res,
            factor,
        } => TaskLoss::Sisr {
            height: high_res.height(),
            width: high_res.width(),
            factor: *factor,
            target: low_res.to_targets(),
        },
        Task::Sdf { .. } => {
            return Err(Error::Config(
                "the sdf loss depends on a sampled batch; use TaskLoss::for_sdf_batch".into(),
            ))
        }
    })
}

impl TaskLoss {
    pub fn for_sdf_batch(batch: &SdfBatch) -> Self {
        TaskLoss::Sdf {
            values: batch.values.clone(),
            scales: batch.scales.clone(),
        }
    }

    /// Loss value and `∂loss/∂pred`.
    pub fn evaluate(&self, pred: &Matrix) -> Result<(f64, Matrix)> {
        match self {
            TaskLoss::Mse { target } => {
                check(pred, target.shape())?;
                let r = pred.sub(target)?;
                let n = r.len() as f64;
                Ok((r.sum_squares() / n, r.scale(2.0 / n)))
            }
            TaskLoss::Ct { geometry, sinogram } => {
                check(pred, (1, geometry.height * geometry.width))?;
                let img = Matrix::new(geometry.height, geometry.width, pred.data().to_vec())?;
                let r = geometry.forward(&img)?.sub(sinogram)?;
                let back = geometry.adjoint(&r)?.scale(2.0);
                Ok((r.sum_squares(), Matrix::new(1, back.len(), back.into_vec())?))
            }
            TaskLoss::Sisr {
                height,
                width,
                factor,
                target,
            } => {
                check(pred, (target.rows(), height * width))?;
                let low = downsample_targets(pred, *height, *width, *factor)?;
                let r = low.sub(target)?;
                let n = r.len() as f64;
                let lw = width / factor;
                let spread = 2.0 / (n * (factor * factor) as f64);
                let grad = Matrix::from_fn(pred.rows(), pred.cols(), |ch, p| {
                    let (row, col) = (p / width, p % width);
                    spread * r[(ch, (row / factor) * lw + col / factor)]
                });
                Ok((r.sum_squares() / n, grad))
            }
            TaskLoss::Sdf { values, scales } => {
                check(pred, values.shape())?;
                let fine: Vec<usize> = (0..scales.len()).filter(|&i| scales[i] == Scale::Fine).collect();
                let coarse: Vec<usize> = (0..scales.len()).filter(|&i| scales[i] == Scale::Coarse).collect();
                let pick = |m: &Matrix, idx: &[usize]| Matrix::from_fn(1, idx.len(), |_, j| m[(0, idx[j])]);
                let (loss, gf, gc) = sdf_loss(
                    &pick(pred, &fine),
                    &pick(values, &fine),
                    &pick(pred, &coarse),
                    &pick(values, &coarse),
                )?;
                let mut grad = Matrix::zeros(1, values.cols());
                for (j, &i) in fine.iter().enumerate() {
                    grad[(0, i)] = gf[(0, j)];
                }
                for (j, &i) in coarse.iter().enumerate() {
                    grad[(0, i)] = gc[(0, j)];
                }
                Ok((loss, grad))
            }
        }
    }
}

fn check(pred: &Matrix, expected: (usize, usize)) -> Result<()> {
    if pred.shape() != expected {
        return Err(Error::shape(
            "task_loss",
            format!("prediction {:?}, expected {:?}", pred.shape(), expected),
        ));
    }
    Ok(())
}
