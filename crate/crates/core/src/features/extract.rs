use serde::{Deserialize, Serialize};

use super::LabeledEpoch;
use crate::error::{CoreError, Result};
use crate::scalar::Real;
use crate::signals::{ChannelRole, DEFAULT_SAMPLE_RATE};
use crate::spectral::{fft_forward, hann, to_complex};

pub const TIME_FEATURES: usize = 8;
pub const MFCC_PER_CHANNEL: usize = 50;
pub const FEATURES_PER_CHANNEL: usize = TIME_FEATURES + MFCC_PER_CHANNEL;
pub const FEATURE_LEN: usize = 6 * FEATURES_PER_CHANNEL;

/// Kurtosis is the non-excess fourth standardized moment (3 for a Gaussian).
pub const TIME_FEATURE_NAMES: [&str; TIME_FEATURES] =
    ["mean", "std", "mean_abs_dev", "skewness", "kurtosis", "min", "max", "rms"];

/// `[mean, std, mean |x - mean|, skewness, kurtosis, min, max, rms]`, all
/// population moments. A zero-variance window has skewness = kurtosis = 0.
pub fn time_features<T: Real>(x: &[T]) -> [T; TIME_FEATURES] {
    if x.is_empty() {
        return [T::zero(); TIME_FEATURES];
    }
    let n = T::from_usize_lossy(x.len());
    let mean = x.iter().copied().sum::<T>() / n;
    let (mut m2, mut m3, mut m4, mut mad, mut sq) = (T::zero(), T::zero(), T::zero(), T::zero(), T::zero());
    let (mut lo, mut hi) = (x[0], x[0]);
    for &v in x {
        let d = v - mean;
        let d2 = d * d;
        m2 = m2 + d2;
        m3 = m3 + d2 * d;
        m4 = m4 + d2 * d2;
        mad = mad + d.abs();
        sq = sq + v * v;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    m2 = m2 / n;
    m3 = m3 / n;
    m4 = m4 / n;
    let std = m2.sqrt();
    let tiny = T::epsilon() * (mean.abs() + T::one());
    let (skew, kurt) = if std <= tiny {
        (T::zero(), T::zero())
    } else {
        (m3 / (m2 * std), m4 / (m2 * m2))
    };
    [mean, std, mad / n, skew, kurt, lo, hi, (sq / n).sqrt()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MfccConfig {
    pub sample_rate: f64,
    pub frames: usize,
    pub frame_s: f64,
    pub n_filters: usize,
    pub n_coeffs: usize,
    pub f_min: f64,
    /// Upper filterbank edge; `None` means Nyquist.
    pub f_max: Option<f64>,
    /// Floor applied to filter energies before the logarithm.
    pub log_floor: f64,
}

impl Default for MfccConfig {
    fn default() -> Self {
        MfccConfig {
            sample_rate: DEFAULT_SAMPLE_RATE,
            frames: 5,
            frame_s: 2.0,
            n_filters: 26,
            n_coeffs: 10,
            f_min: 0.0,
            f_max: None,
            log_floor: 1e-10,
        }
    }
}

fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

impl MfccConfig {
    pub fn frame_len(&self) -> usize {
        (self.frame_s * self.sample_rate).round() as usize
    }

    pub fn window_len(&self) -> usize {
        self.frames * self.frame_len()
    }

    pub fn len(&self) -> usize {
        self.frames * self.n_coeffs
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn validate(&self) -> Result<()> {
        let nyq = self.sample_rate / 2.0;
        let f_max = self.f_max.unwrap_or(nyq);
        if self.frames == 0 || self.frame_len() < 2 || self.n_filters == 0 {
            return Err(CoreError::param("mfcc needs at least one frame of two samples and one filter"));
        }
        if self.n_coeffs == 0 || self.n_coeffs > self.n_filters {
            return Err(CoreError::param(format!(
                "mfcc keeps 1..={} coefficients (got {})",
                self.n_filters, self.n_coeffs
            )));
        }
        if !(self.f_min >= 0.0 && self.f_min < f_max && f_max <= nyq) {
            return Err(CoreError::param(format!(
                "mfcc filterbank edges must satisfy 0 <= {} < {} <= {}",
                self.f_min, f_max, nyq
            )));
        }
        if !(self.log_floor > 0.0) {
            return Err(CoreError::param("mfcc log floor must be positive"));
        }
        Ok(())
    }

    /// Triangular mel filters evaluated at the one-sided bin frequencies
    /// of a frame; row `m` holds the weights of filter `m`.
    pub fn filterbank(&self) -> Vec<Vec<f64>> {
        let n = self.frame_len();
        let bins = n / 2 + 1;
        let f_max = self.f_max.unwrap_or(self.sample_rate / 2.0);
        let (m0, m1) = (hz_to_mel(self.f_min), hz_to_mel(f_max));
        let edges: Vec<f64> = (0..self.n_filters + 2)
            .map(|i| mel_to_hz(m0 + (m1 - m0) * i as f64 / (self.n_filters + 1) as f64))
            .collect();
        (0..self.n_filters)
            .map(|m| {
                let (lo, c, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                (0..bins)
                    .map(|k| {
                        let f = k as f64 * self.sample_rate / n as f64;
                        if f >= lo && f <= c {
                            (f - lo) / (c - lo)
                        } else if f > c && f <= hi {
                            (hi - f) / (hi - c)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// Orthonormal DCT-II, first `keep` coefficients.
fn dct2<T: Real>(x: &[T], keep: usize) -> Vec<T> {
    let n = x.len();
    let nf = n as f64;
    (0..keep)
        .map(|k| {
            let s = if k == 0 { (1.0 / nf).sqrt() } else { (2.0 / nf).sqrt() };
            let acc: f64 = x
                .iter()
                .enumerate()
                .map(|(i, v)| v.as_f64() * (std::f64::consts::PI * k as f64 * (2 * i + 1) as f64 / (2.0 * nf)).cos())
                .sum();
            T::lit(s * acc)
        })
        .collect()
}

/// Cepstral coefficients of each non-overlapping frame, frame-major.
pub fn mfcc_features<T: Real>(window: &[T], cfg: &MfccConfig) -> Result<Vec<T>> {
    cfg.validate()?;
    if window.len() != cfg.window_len() {
        return Err(CoreError::param(format!(
            "mfcc window must have {} samples (got {})",
            cfg.window_len(),
            window.len()
        )));
    }
    let n = cfg.frame_len();
    let taper: Vec<T> = hann(n);
    let bank = cfg.filterbank();
    let floor = cfg.log_floor;
    let mut out = Vec::with_capacity(cfg.len());
    for frame in window.chunks_exact(n) {
        let tapered: Vec<T> = frame.iter().zip(&taper).map(|(&x, &w)| x * w).collect();
        let mut buf = to_complex(&tapered);
        fft_forward(&mut buf);
        let power: Vec<f64> = buf[..n / 2 + 1].iter().map(|c| c.norm_sqr().as_f64()).collect();
        let log_energy: Vec<T> = bank
            .iter()
            .map(|w| {
                let e: f64 = w.iter().zip(&power).map(|(a, b)| a * b).sum();
                T::lit(e.max(floor).ln())
            })
            .collect();
        out.extend(dct2(&log_energy, cfg.n_coeffs));
    }
    Ok(out)
}

/// The 348 values of one epoch, channel-major in canonical role order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn names() -> Vec<String> {
        feature_names()
    }

    /// The 58-value block of one channel.
    pub fn channel_block(&self, idx: usize) -> &[f64] {
        &self.values[idx * FEATURES_PER_CHANNEL..(idx + 1) * FEATURES_PER_CHANNEL]
    }
}

pub fn feature_names() -> Vec<String> {
    let mut names = Vec::with_capacity(FEATURE_LEN);
    for role in ChannelRole::SEPARATED {
        let ch = role.snake();
        for stat in TIME_FEATURE_NAMES {
            names.push(format!("{ch}_{stat}"));
        }
        for f in 0..5 {
            for c in 0..10 {
                names.push(format!("{ch}_mfcc_f{f}_c{c}"));
            }
        }
    }
    names
}

pub fn feature_vector(epoch: &LabeledEpoch, cfg: &MfccConfig) -> Result<FeatureVector> {
    if epoch.channels.len() != ChannelRole::SEPARATED.len() {
        return Err(CoreError::param(format!(
            "epoch has {} channels, expected {}",
            epoch.channels.len(),
            ChannelRole::SEPARATED.len()
        )));
    }
    if cfg.len() != MFCC_PER_CHANNEL {
        return Err(CoreError::param(format!(
            "feature vector needs {MFCC_PER_CHANNEL} cepstral values per channel (config gives {})",
            cfg.len()
        )));
    }
    let mut values = Vec::with_capacity(FEATURE_LEN);
    for ch in &epoch.channels {
        values.extend(time_features(ch));
        values.extend(mfcc_features(ch, cfg)?);
    }
    Ok(FeatureVector { values })
}
