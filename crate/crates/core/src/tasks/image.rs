use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, Luma, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// An image with values in `[0, 1]`, stored row-major with interleaved channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSignal {
    height: usize,
    width: usize,
    channels: usize,
    data: Vec<f64>,
}

impl ImageSignal {
    /// Values outside `[0, 1]` are clamped; non-finite values are rejected.
    pub fn new(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::Config(format!("images must have 1 or 3 channels, got {channels}")));
        }
        if height == 0 || width == 0 {
            return Err(Error::EmptyInput("image with zero height or width".into()));
        }
        if data.len() != height * width * channels {
            return Err(Error::shape(
                "image",
                format!("{} values for {height}x{width}x{channels}", data.len()),
            ));
        }
        if let Some(v) = data.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("image value {v}")));
        }
        let data = data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        Ok(Self {
            height,
            width,
            channels,
            data,
        })
    }

    pub fn from_fn(height: usize, width: usize, channels: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * channels);
        for r in 0..height {
            for c in 0..width {
                for ch in 0..channels {
                    data.push(f(r, c, ch));
                }
            }
        }
        Self::new(height, width, channels, data)
    }

    /// A single-channel image from an `H x W` matrix.
    pub fn from_gray(m: &Matrix) -> Result<Self> {
        Self::new(m.rows(), m.cols(), 1, m.data().to_vec())
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize, ch: usize) -> f64 {
        self.data[(r * self.width + c) * self.channels + ch]
    }

    /// Channel `ch` as an `H x W` matrix.
    pub fn channel(&self, ch: usize) -> Matrix {
        Matrix::from_fn(self.height, self.width, |r, c| self.get(r, c, ch))
    }

    /// `C x (H·W)` matrix of targets, column `r·W + c` for pixel `(r, c)`.
    pub fn to_targets(&self) -> Matrix {
        let n = self.pixel_count();
        Matrix::from_fn(self.channels, n, |ch, p| self.data[p * self.channels + ch])
    }

    /// Inverse of [`ImageSignal::to_targets`]; values are clamped into `[0, 1]`.
    pub fn from_targets(height: usize, width: usize, targets: &Matrix) -> Result<Self> {
        if targets.cols() != height * width {
            return Err(Error::shape(
                "from_targets",
                format!("{} columns for {height}x{width}", targets.cols()),
            ));
        }
        let ch = targets.rows();
        Self::from_fn(height, width, ch, |r, c, k| targets[(k, r * width + c)])
    }

    /// Grayscale version (ITU-R 601 luma for RGB).
    pub fn to_gray(&self) -> ImageSignal {
        if self.channels == 1 {
            return self.clone();
        }
        let data = self
            .data
            .chunks(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect();
        ImageSignal {
            height: self.height,
            width: self.width,
            channels: 1,
            data,
        }
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> Result<Self> {
        if top + height > self.height || left + width > self.width {
            return Err(Error::shape(
                "crop",
                format!("{height}x{width} at ({top},{left}) outside {}x{}", self.height, self.width),
            ));
        }
        Self::from_fn(height, width, self.channels, |r, c, k| self.get(top + r, left + c, k))
    }

    /// Loads an 8-bit PNG or PGM/PPM. Grayscale files give one channel,
    /// everything else is converted to RGB.
    pub fn load(path: &Path) -> Result<Self> {
        let img = image::open(path).map_err(|e| codec_error(path, e))?;
        let gray = matches!(
            img,
            DynamicImage::ImageLuma8(_) | DynamicImage::ImageLuma16(_) | DynamicImage::ImageLumaA8(_) | DynamicImage::ImageLumaA16(_)
        );
        if gray {
            let g = img.to_luma8();
            let (w, h) = g.dimensions();
            Self::new(h as usize, w as usize, 1, g.into_raw().into_iter().map(|v| v as f64 / 255.0).collect())
        } else {
            let rgb = img.to_rgb8();
            let (w, h) = rgb.dimensions();
            Self::new(h as usize, w as usize, 3, rgb.into_raw().into_iter().map(|v| v as f64 / 255.0).collect())
        }
    }

    /// Writes an 8-bit image; the format follows the extension (`.png`, `.pgm`, `.ppm`).
    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes: Vec<u8> = self.data.iter().map(|&v| (v * 255.0).round().clamp(0.0, 255.0) as u8).collect();
        let (w, h) = (self.width as u32, self.height as u32);
        let result = if self.channels == 1 {
            let img: GrayImage = ImageBuffer::<Luma<u8>, _>::from_raw(w, h, bytes).expect("buffer size");
            img.save(path)
        } else {
            let img: RgbImage = ImageBuffer::<Rgb<u8>, _>::from_raw(w, h, bytes).expect("buffer size");
            img.save(path)
        };
        result.map_err(|e| codec_error(path, e))
    }
}

fn codec_error(path: &Path, e: image::ImageError) -> Error {
    match e {
        image::ImageError::IoError(io) => Error::io(path, io),
        e => Error::Codec {
            path: path.to_path_buf(),
            detail: e.to_string(),
        },
    }
}

/// `n` evenly spaced values over `[-1, 1]` (the single value 0 when `n == 1`).
pub(crate) fn linspace_unit(n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![0.0];
    }
    (0..n).map(|i| -1.0 + 2.0 * i as f64 / (n - 1) as f64).collect()
}

/// `2 x (H·W)` pixel-centre coordinates in `[-1, 1]²`; row 0 is the column
/// (x) coordinate and row 1 the row (y) coordinate.
pub fn grid_coords(height: usize, width: usize) -> Matrix {
    let xs = linspace_unit(width);
    let ys = linspace_unit(height);
    Matrix::from_fn(2, height * width, |d, p| if d == 0 { xs[p % width] } else { ys[p / width] })
}
