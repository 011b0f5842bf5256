use std::f64::consts::PI;
use std::path::Path;

use crate::error::{Error, Result};
use crate::linalg::Matrix;

/// Mono audio with samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("audio with no samples".into()));
        }
        if sample_rate == 0 {
            return Err(Error::Config("sample rate must be > 0".into()));
        }
        if let Some(v) = samples.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("audio sample {v}")));
        }
        let samples = samples.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect();
        Ok(Self { samples, sample_rate })
    }

    /// Linear chirp sweeping `f0 → f1` Hz over `duration` seconds at
    /// amplitude `amp`.
    pub fn chirp(duration: f64, sample_rate: u32, f0: f64, f1: f64, amp: f64) -> Result<Self> {
        let n = (duration * sample_rate as f64).round() as usize;
        let k = (f1 - f0) / duration;
        let samples = (0..n)
            .map(|i| {
                let t = i as f64 / sample_rate as f64;
                amp * (2.0 * PI * (f0 * t + 0.5 * k * t * t)).sin()
            })
            .collect();
        Self::new(samples, sample_rate)
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// `1 x N` targets.
    pub fn to_targets(&self) -> Matrix {
        Matrix::from_fn(1, self.len(), |_, j| self.samples[j])
    }

    /// `1 x N` time coordinates evenly spaced over `[-extent, extent]`.
    pub fn coords(&self, extent: f64) -> Matrix {
        let n = self.len();
        Matrix::from_fn(1, n, |_, j| {
            if n == 1 {
                0.0
            } else {
                extent * (-1.0 + 2.0 * j as f64 / (n - 1) as f64)
            }
        })
    }

    /// Reads a 16-bit PCM WAV. Multi-channel files are averaged to mono.
    pub fn load(path: &Path) -> Result<Self> {
        let mut reader = hound::WavReader::open(path).map_err(|e| wav_error(path, e))?;
        let spec = reader.spec();
        if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
            return Err(Error::Codec {
                path: path.to_path_buf(),
                detail: format!("expected 16-bit PCM, got {:?} {}-bit", spec.sample_format, spec.bits_per_sample),
            });
        }
        let raw: Vec<i16> = reader
            .samples::<i16>()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| wav_error(path, e))?;
        let ch = spec.channels as usize;
        let samples = raw
            .chunks(ch)
            .map(|frame| frame.iter().map(|&s| s as f64 / 32768.0).sum::<f64>() / ch as f64)
            .collect();
        Self::new(samples, spec.sample_rate)
    }

    /// Writes 16-bit PCM mono.
    pub fn save(&self, path: &Path) -> Result<()> {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: self.sample_rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut w = hound::WavWriter::create(path, spec).map_err(|e| wav_error(path, e))?;
        for &s in &self.samples {
            let v = (s * 32767.0).round().clamp(-32768.0, 32767.0) as i16;
            w.write_sample(v).map_err(|e| wav_error(path, e))?;
        }
        w.finalize().map_err(|e| wav_error(path, e))
    }
}

fn wav_error(path: &Path, e: hound::Error) -> Error {
    match e {
        hound::Error::IoError(io) => Error::io(path, io),
        e => Error::Codec {
            path: path.to_path_buf(),
            detail: e.to_string(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chirp_length_and_range() {
        let a = AudioSignal::chirp(0.2, 16_000, 100.0, 2000.0, 0.9).unwrap();
        assert_eq!(a.len(), 3200);
        assert!((a.duration() - 0.2).abs() < 1e-12);
        assert!(a.samples().iter().all(|v| v.abs() <= 0.9));
        assert_eq!(a.samples()[0], 0.0);
    }

    #[test]
    fn wav_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.wav");
        let a = AudioSignal::chirp(0.01, 8000, 50.0, 500.0, 0.5).unwrap();
        a.save(&p).unwrap();
        let b = AudioSignal::load(&p).unwrap();
        assert_eq!(b.sample_rate, 8000);
        assert_eq!(b.len(), a.len());
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert!((x - y).abs() < 1e-4);
        }
    }

    #[test]
    fn coords_respect_extent() {
        let a = AudioSignal::new(vec![0.0; 5], 10).unwrap();
        let c = a.coords(100.0);
        assert_eq!(c.data(), &[-100.0, -50.0, 0.0, 50.0, 100.0]);
        assert!(a.coords(1.0).data().iter().all(|v| v.abs() <= 1.0));
    }

    #[test]
    fn rejects_empty_and_nan() {
        assert!(AudioSignal::new(vec![], 10).is_err());
        assert!(AudioSignal::new(vec![f64::INFINITY], 10).is_err());
        assert_eq!(
            AudioSignal::load(Path::new("/nonexistent.wav")).unwrap_err().exit_code(),
            4
        );
    }
}
