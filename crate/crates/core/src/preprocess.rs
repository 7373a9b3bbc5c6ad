//! Channel conditioning: mains notch, linear detrend, robust outlier clipping,
//! zero-phase Butterworth bandpass, and the electrode impedance check.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessConfig {
    pub mains_hz: f64,
    pub notch_q: f64,
    pub outlier_sigma: f64,
    pub bandpass: Option<(f64, f64)>,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig {
            mains_hz: 60.0,
            notch_q: 35.0,
            outlier_sigma: 6.0,
            bandpass: None,
        }
    }
}

impl PreprocessConfig {
    pub fn validate(&self, sample_rate: f64) -> Result<()> {
        if self.mains_hz != 50.0 && self.mains_hz != 60.0 {
            return Err(CoreError::param(format!(
                "mains frequency must be 50 or 60 Hz, got {}",
                self.mains_hz
            )));
        }
        if !(self.notch_q > 0.0) || !(self.outlier_sigma > 0.0) {
            return Err(CoreError::param("notch_q and outlier_sigma must be positive"));
        }
        if let Some((lo, hi)) = self.bandpass {
            check_band(lo, hi, sample_rate)?;
        }
        Ok(())
    }
}

/// Runs notch, detrend, outlier clip and the optional bandpass, in that order.
pub fn preprocess_channel<T: Real>(x: &[T], sample_rate: f64, cfg: &PreprocessConfig) -> Result<Vec<T>> {
    cfg.validate(sample_rate)?;
    let y = notch_filter(x, sample_rate, cfg.mains_hz, cfg.notch_q)?;
    let y = detrend_linear(&y)?;
    let y = outlier_clip(&y, T::lit(cfg.outlier_sigma))?;
    match cfg.bandpass {
        Some((lo, hi)) => bandpass(&y, sample_rate, lo, hi),
        None => Ok(y),
    }
}

/// Second-order IIR section, `a0` normalized to 1.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b: [f64; 3],
    pub a: [f64; 2],
}

impl Biquad {
    fn normalized(b: [f64; 3], a: [f64; 3]) -> Self {
        Biquad {
            b: [b[0] / a[0], b[1] / a[0], b[2] / a[0]],
            a: [a[1] / a[0], a[2] / a[0]],
        }
    }

    pub fn notch(fs: f64, f0: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * f0 / fs;
        let alpha = w0.sin() / (2.0 * q);
        let c = w0.cos();
        Self::normalized([1.0, -2.0 * c, 1.0], [1.0 + alpha, -2.0 * c, 1.0 - alpha])
    }

    pub fn lowpass(fs: f64, f0: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * f0 / fs;
        let alpha = w0.sin() / (2.0 * q);
        let c = w0.cos();
        Self::normalized(
            [(1.0 - c) / 2.0, 1.0 - c, (1.0 - c) / 2.0],
            [1.0 + alpha, -2.0 * c, 1.0 - alpha],
        )
    }

    pub fn highpass(fs: f64, f0: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * f0 / fs;
        let alpha = w0.sin() / (2.0 * q);
        let c = w0.cos();
        Self::normalized(
            [(1.0 + c) / 2.0, -(1.0 + c), (1.0 + c) / 2.0],
            [1.0 + alpha, -2.0 * c, 1.0 - alpha],
        )
    }

    /// Magnitude response at `f` Hz.
    pub fn gain(&self, fs: f64, f: f64) -> f64 {
        let w = 2.0 * PI * f / fs;
        let z1 = num_complex::Complex::from_polar(1.0, -w);
        let z2 = z1 * z1;
        let num = self.b[0] + z1 * self.b[1] + z2 * self.b[2];
        let den = 1.0 + z1 * self.a[0] + z2 * self.a[1];
        (num / den).norm()
    }

    /// Direct form II transposed, zero initial state.
    pub fn apply<T: Real>(&self, x: &[T]) -> Vec<T> {
        let [b0, b1, b2] = self.b.map(T::lit);
        let [a1, a2] = self.a.map(T::lit);
        let (mut s1, mut s2) = (T::zero(), T::zero());
        x.iter()
            .map(|&v| {
                let y = b0 * v + s1;
                s1 = b1 * v - a1 * y + s2;
                s2 = b2 * v - a2 * y;
                y
            })
            .collect()
    }
}

/// Q factors of the two sections of a 4th-order Butterworth response.
const BUTTER4_Q: [f64; 2] = [0.541_196_100_146_197, 1.306_562_964_876_376_6];

fn check_band(lo: f64, hi: f64, fs: f64) -> Result<()> {
    if !(0.0 < lo && lo < hi && hi < fs / 2.0) {
        return Err(CoreError::param(format!(
            "band [{lo}, {hi}] must satisfy 0 < lo < hi < {}",
            fs / 2.0
        )));
    }
    Ok(())
}

pub fn notch_filter<T: Real>(x: &[T], sample_rate: f64, mains_hz: f64, q: f64) -> Result<Vec<T>> {
    if !(mains_hz > 0.0 && mains_hz < sample_rate / 2.0) {
        return Err(CoreError::param(format!(
            "notch frequency {mains_hz} Hz must lie below nyquist {}",
            sample_rate / 2.0
        )));
    }
    if !(q > 0.0) {
        return Err(CoreError::param("notch q must be positive"));
    }
    Ok(Biquad::notch(sample_rate, mains_hz, q).apply(x))
}

/// Removes the least-squares line through the samples.
pub fn detrend_linear<T: Real>(x: &[T]) -> Result<Vec<T>> {
    let n = x.len();
    if n < 2 {
        return Err(CoreError::param("detrend needs at least 2 samples"));
    }
    // centered abscissa keeps the normal equations well conditioned
    let nf = T::from_usize_lossy(n);
    let tc = (nf - T::one()) / T::lit(2.0);
    let mean = x.iter().copied().sum::<T>() / nf;
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for (i, &v) in x.iter().enumerate() {
        let t = T::from_usize_lossy(i) - tc;
        sxy = sxy + t * (v - mean);
        sxx = sxx + t * t;
    }
    let slope = sxy / sxx;
    Ok(x
        .iter()
        .enumerate()
        .map(|(i, &v)| v - mean - slope * (T::from_usize_lossy(i) - tc))
        .collect())
}

fn median<T: Real>(values: &mut [T]) -> T {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / T::lit(2.0)
    }
}

/// Replaces samples further than `sigma` robust standard deviations from the
/// median (robust std = 1.4826·MAD) by linear interpolation between the
/// nearest inliers. Unflagged samples are returned untouched.
pub fn outlier_clip<T: Real>(x: &[T], sigma: T) -> Result<Vec<T>> {
    if !(sigma > T::zero()) {
        return Err(CoreError::param("sigma must be positive"));
    }
    if x.is_empty() {
        return Ok(Vec::new());
    }
    let med = median(&mut x.to_vec());
    let mad = median(&mut x.iter().map(|v| (*v - med).abs()).collect::<Vec<_>>());
    let robust_std = T::lit(1.4826) * mad;
    if robust_std <= T::zero() {
        return Ok(x.to_vec());
    }
    let limit = sigma * robust_std;
    let flagged: Vec<bool> = x.iter().map(|v| (*v - med).abs() > limit).collect();
    let inliers: Vec<usize> = (0..x.len()).filter(|&i| !flagged[i]).collect();
    if inliers.is_empty() {
        return Err(CoreError::Degenerate("every sample flagged as outlier".into()));
    }
    let mut out = x.to_vec();
    let mut next = 0usize;
    for i in 0..x.len() {
        if !flagged[i] {
            continue;
        }
        while next < inliers.len() && inliers[next] < i {
            next += 1;
        }
        let right = inliers.get(next).copied();
        let left = if next > 0 { Some(inliers[next - 1]) } else { None };
        out[i] = match (left, right) {
            (Some(l), Some(r)) => {
                let w = T::from_usize_lossy(i - l) / T::from_usize_lossy(r - l);
                x[l] + (x[r] - x[l]) * w
            }
            (Some(l), None) => x[l],
            (None, Some(r)) => x[r],
            (None, None) => unreachable!("inliers nonempty"),
        };
    }
    Ok(out)
}

/// Zero-phase 4th-order Butterworth bandpass (high-pass and low-pass
/// cascade, run forward and backward over a mirror-padded copy).
pub fn bandpass<T: Real>(x: &[T], sample_rate: f64, lo: f64, hi: f64) -> Result<Vec<T>> {
    check_band(lo, hi, sample_rate)?;
    let sections = bandpass_sections(sample_rate, lo, hi);
    let pad = ((3.0 * sample_rate / lo).ceil() as usize).min(x.len().saturating_sub(1));
    Ok(filtfilt(&sections, x, pad))
}

pub fn bandpass_sections(sample_rate: f64, lo: f64, hi: f64) -> Vec<Biquad> {
    BUTTER4_Q
        .iter()
        .map(|&q| Biquad::highpass(sample_rate, lo, q))
        .chain(BUTTER4_Q.iter().map(|&q| Biquad::lowpass(sample_rate, hi, q)))
        .collect()
}

fn filtfilt<T: Real>(sections: &[Biquad], x: &[T], pad: usize) -> Vec<T> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| x[i]));
    ext.extend_from_slice(x);
    ext.extend((1..=pad).map(|i| x[n - 1 - i]));
    let run = |mut y: Vec<T>| {
        for s in sections {
            y = s.apply(&y);
        }
        y
    };
    let mut y = run(ext);
    y.reverse();
    let mut y = run(y);
    y.reverse();
    y[pad..pad + n].to_vec()
}

pub const DEFAULT_INJECTED_CURRENT_A: f64 = 6e-9;
pub const DEFAULT_SERIES_RESISTANCE_OHM: f64 = 5000.0;
pub const IMPEDANCE_CEILING_OHM: f64 = 5000.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImpedanceReading {
    pub v_rms: f64,
    pub i_amp: f64,
    pub series_r: f64,
    pub z: f64,
    pub in_range: bool,
}

/// Electrode-skin impedance from a lead-off measurement:
/// `Z = v_rms·√2 / i_amp − series_r`.
///
/// Results below zero by less than one part per million of the series
/// resistor are rounding in the reported voltage and read as 0 Ω; anything
/// lower means the measurement is implausible and is an error.
pub fn electrode_impedance(v_rms: f64, i_amp: f64, series_r: f64) -> Result<ImpedanceReading> {
    if !(i_amp > 0.0) {
        return Err(CoreError::param("injected current must be positive"));
    }
    if !(v_rms >= 0.0) || !(series_r >= 0.0) {
        return Err(CoreError::param("voltage and series resistance must be nonnegative"));
    }
    let mut z = v_rms * std::f64::consts::SQRT_2 / i_amp - series_r;
    if z < 0.0 {
        if z >= -1e-6 * series_r.max(1.0) {
            z = 0.0;
        } else {
            return Err(CoreError::InvalidParameter(format!(
                "impedance {z:.3} Ohm below zero: reading under the series resistance"
            )));
        }
    }
    Ok(ImpedanceReading {
        v_rms,
        i_amp,
        series_r,
        z,
        in_range: (0.0..=IMPEDANCE_CEILING_OHM).contains(&z),
    })
}
