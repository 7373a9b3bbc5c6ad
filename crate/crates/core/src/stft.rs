//! Short-time Fourier transform with a Hann analysis window and its
//! overlap-add inverse.
//!
//! Frames start at `j * hop - (window_len - hop)` so that every input sample
//! is covered by the same number of frames; the signal is zero padded on both
//! ends as needed. The inverse divides the overlap-added frames by the summed
//! window, which is exact wherever that sum is nonzero.

use ndarray::Array2;
use num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::scalar::Real;
use crate::spectral::hann;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StftConfig {
    pub window_len: usize,
    pub hop: usize,
}

impl Default for StftConfig {
    fn default() -> Self {
        StftConfig { window_len: 256, hop: 128 }
    }
}

impl StftConfig {
    pub fn bins(&self) -> usize {
        self.window_len / 2 + 1
    }

    /// Checks the hop against the window and the constant-overlap-add condition.
    pub fn validate(&self) -> Result<()> {
        if self.window_len < 2 || self.hop == 0 || self.hop > self.window_len {
            return Err(CoreError::param(format!(
                "stft needs 0 < hop <= window_len and window_len >= 2 (got window {}, hop {})",
                self.window_len, self.hop
            )));
        }
        let w: Vec<f64> = hann(self.window_len);
        let sums: Vec<f64> = (0..self.hop)
            .map(|r| w.iter().skip(r).step_by(self.hop).sum())
            .collect();
        let max = sums.iter().cloned().fold(f64::MIN, f64::max);
        let min = sums.iter().cloned().fold(f64::MAX, f64::min);
        if min <= 0.0 || (max - min) > 1e-9 * max {
            return Err(CoreError::param(format!(
                "hann window of {} with hop {} does not satisfy constant overlap-add",
                self.window_len, self.hop
            )));
        }
        Ok(())
    }

    fn pad_front(&self) -> usize {
        self.window_len - self.hop
    }

    pub fn frames_for(&self, len: usize) -> usize {
        if len == 0 {
            return 0;
        }
        (len - 1 + self.pad_front()) / self.hop + 1
    }
}

/// Complex STFT (`bins x frames`) plus the metadata needed to invert it.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram<T> {
    pub complex: Array2<Complex<T>>,
    pub cfg: StftConfig,
    pub sample_rate: f64,
    pub signal_len: usize,
}

impl<T: Real> Spectrogram<T> {
    pub fn bins(&self) -> usize {
        self.complex.nrows()
    }

    pub fn frames(&self) -> usize {
        self.complex.ncols()
    }

    /// `|X|^2` elementwise.
    pub fn power(&self) -> Array2<T> {
        self.complex.mapv(|c| c.norm_sqr())
    }

    pub fn bin_hz(&self) -> Vec<f64> {
        let df = self.sample_rate / self.cfg.window_len as f64;
        (0..self.bins()).map(|k| k as f64 * df).collect()
    }

    /// Center time of each frame in seconds, relative to the first sample.
    pub fn frame_s(&self) -> Vec<f64> {
        let pad = self.cfg.pad_front() as f64;
        let half = self.cfg.window_len as f64 / 2.0;
        (0..self.frames())
            .map(|j| ((j * self.cfg.hop) as f64 - pad + half) / self.sample_rate)
            .collect()
    }

    /// Returns a copy whose bins are scaled elementwise by `mask`.
    pub fn masked(&self, mask: &Array2<T>) -> Result<Spectrogram<T>> {
        if mask.dim() != self.complex.dim() {
            return Err(CoreError::ShapeMismatch(format!(
                "mask {:?} vs spectrogram {:?}",
                mask.dim(),
                self.complex.dim()
            )));
        }
        let mut out = self.clone();
        out.complex.zip_mut_with(mask, |c, &m| *c = *c * m);
        Ok(out)
    }
}

pub fn stft<T: Real>(signal: &[T], sample_rate: f64, cfg: &StftConfig) -> Result<Spectrogram<T>> {
    cfg.validate()?;
    let n = cfg.window_len;
    let frames = cfg.frames_for(signal.len());
    let bins = cfg.bins();
    let w: Vec<T> = hann(n);
    let fft = FftPlanner::<T>::new().plan_fft_forward(n);
    let mut out = Array2::from_elem((bins, frames), Complex::new(T::zero(), T::zero()));
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    for j in 0..frames {
        let start = (j * cfg.hop) as isize - cfg.pad_front() as isize;
        for (i, slot) in buf.iter_mut().enumerate() {
            let idx = start + i as isize;
            let v = if idx >= 0 && (idx as usize) < signal.len() {
                signal[idx as usize] * w[i]
            } else {
                T::zero()
            };
            *slot = Complex::new(v, T::zero());
        }
        fft.process(&mut buf);
        for k in 0..bins {
            out[[k, j]] = buf[k];
        }
    }
    Ok(Spectrogram {
        complex: out,
        cfg: *cfg,
        sample_rate,
        signal_len: signal.len(),
    })
}

pub fn istft<T: Real>(spec: &Spectrogram<T>) -> Result<Vec<T>> {
    let cfg = spec.cfg;
    cfg.validate()?;
    let n = cfg.window_len;
    if spec.bins() != cfg.bins() {
        return Err(CoreError::ShapeMismatch(format!(
            "spectrogram has {} bins, window of {} needs {}",
            spec.bins(),
            n,
            cfg.bins()
        )));
    }
    let len = spec.signal_len;
    let w: Vec<T> = hann(n);
    let ifft = FftPlanner::<T>::new().plan_fft_inverse(n);
    let mut acc = vec![T::zero(); len];
    let mut wsum = vec![T::zero(); len];
    let mut buf = vec![Complex::new(T::zero(), T::zero()); n];
    let scale = T::one() / T::from_usize_lossy(n);
    for j in 0..spec.frames() {
        for k in 0..n {
            buf[k] = if k < spec.bins() {
                spec.complex[[k, j]]
            } else {
                spec.complex[[n - k, j]].conj()
            };
        }
        ifft.process(&mut buf);
        let start = (j * cfg.hop) as isize - cfg.pad_front() as isize;
        for (i, v) in buf.iter().enumerate() {
            let idx = start + i as isize;
            if idx >= 0 && (idx as usize) < len {
                acc[idx as usize] = acc[idx as usize] + v.re * scale;
                wsum[idx as usize] = wsum[idx as usize] + w[i];
            }
        }
    }
    Ok(acc
        .into_iter()
        .zip(wsum)
        .map(|(a, s)| if s > T::zero() { a / s } else { T::zero() })
        .collect())
}
