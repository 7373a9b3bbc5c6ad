//! Motion-artifact removal: correlate VMD mode envelopes with the IMU
//! acceleration magnitude and rebuild the channel from uncorrelated modes.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::scalar::Real;
use crate::signals::Imu;
use crate::spectral::{analytic_envelope, interpolate_at, moving_average, pearson};
use crate::vmd::{vmd_decompose, VmdConfig, VmdResult};

/// Envelope smoothing window before resampling to the IMU rate.
pub const ENVELOPE_SMOOTHING_S: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionCorrelation {
    /// Pearson coefficient per mode, in mode order.
    pub r: Vec<f64>,
    pub threshold: f64,
}

impl MotionCorrelation {
    pub fn excluded(&self) -> Vec<bool> {
        self.r.iter().map(|r| r.abs() > self.threshold).collect()
    }
}

/// Correlates precomputed envelopes (already at the IMU rate) with the
/// centred acceleration magnitude.
pub fn correlate_envelopes(envelopes: &[Vec<f64>], accel_magnitude: &[f64], threshold: f64) -> MotionCorrelation {
    let mean = accel_magnitude.iter().sum::<f64>() / accel_magnitude.len().max(1) as f64;
    let centred: Vec<f64> = accel_magnitude.iter().map(|a| a - mean).collect();
    MotionCorrelation {
        r: envelopes.iter().map(|e| pearson(e, &centred)).collect(),
        threshold,
    }
}

/// Smoothed Hilbert envelope of every mode, sampled at the IMU timestamps
/// that fall inside the mode's support. `offset_s` is the time of the first
/// mode sample on the IMU clock.
pub fn mode_envelopes<T: Real>(
    result: &VmdResult<T>,
    sample_rate: f64,
    imu: &Imu,
    offset_s: f64,
) -> (Vec<Vec<f64>>, Vec<f64>) {
    let n = result.residual.len();
    let end_s = offset_s + (n.saturating_sub(1)) as f64 / sample_rate;
    let idx: Vec<usize> = (0..imu.len())
        .filter(|&j| {
            let t = j as f64 / imu.rate;
            t >= offset_s && t <= end_s
        })
        .collect();
    let local_times: Vec<f64> = idx.iter().map(|&j| j as f64 / imu.rate - offset_s).collect();
    let magnitude = imu.magnitude();
    let accel: Vec<f64> = idx.iter().map(|&j| magnitude[j]).collect();
    let width = (ENVELOPE_SMOOTHING_S * sample_rate).round() as usize;
    let envelopes = result
        .modes
        .iter()
        .map(|mode| {
            let env = moving_average(&analytic_envelope(mode), width);
            interpolate_at(&env, sample_rate, &local_times)
                .into_iter()
                .map(|v| v.as_f64())
                .collect()
        })
        .collect();
    (envelopes, accel)
}

pub fn motion_correlation<T: Real>(
    result: &VmdResult<T>,
    sample_rate: f64,
    imu: &Imu,
    offset_s: f64,
    threshold: f64,
) -> Result<MotionCorrelation> {
    let (envelopes, accel) = mode_envelopes(result, sample_rate, imu, offset_s);
    if accel.len() < 2 {
        return Err(CoreError::param("modes and acceleration do not overlap in time"));
    }
    Ok(correlate_envelopes(&envelopes, &accel, threshold))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Reconstruction<T> {
    pub signal: Vec<T>,
    /// Set when every mode was excluded and the output is all zeros.
    pub all_excluded: bool,
}

pub fn reconstruct_excluding_motion<T: Real>(
    result: &VmdResult<T>,
    corr: &MotionCorrelation,
) -> Result<Reconstruction<T>> {
    if corr.r.len() != result.modes.len() {
        return Err(CoreError::LengthMismatch(format!(
            "{} correlations for {} modes",
            corr.r.len(),
            result.modes.len()
        )));
    }
    let excluded = corr.excluded();
    let mut signal = vec![T::zero(); result.residual.len()];
    for (mode, _) in result.modes.iter().zip(&excluded).filter(|(_, ex)| !**ex) {
        for (s, v) in signal.iter_mut().zip(mode) {
            *s = *s + *v;
        }
    }
    let all_excluded = excluded.iter().all(|e| *e);
    if all_excluded {
        log::warn!("every VMD mode correlates with motion; returning a zero signal");
    }
    Ok(Reconstruction { signal, all_excluded })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DenoiseConfig {
    pub vmd: VmdConfig,
    pub corr_threshold: f64,
    pub block_s: f64,
    pub overlap_s: f64,
}

impl Default for DenoiseConfig {
    fn default() -> Self {
        DenoiseConfig {
            vmd: VmdConfig::default(),
            corr_threshold: 0.3,
            block_s: 30.0,
            overlap_s: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockReport {
    pub start_s: f64,
    pub end_s: f64,
    pub center_freqs: Vec<f64>,
    pub r: Vec<f64>,
    pub excluded: Vec<bool>,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenoiseOutput<T> {
    pub signal: Vec<T>,
    pub blocks: Vec<BlockReport>,
}

/// Block boundaries `[start, end)` in samples. Consecutive blocks overlap by at
/// least `overlap`; the last block is pulled back to end exactly at `n`.
pub fn block_bounds(n: usize, block: usize, overlap: usize) -> Vec<(usize, usize)> {
    if n <= block || block <= overlap {
        return vec![(0, n)];
    }
    let step = block - overlap;
    let mut bounds = Vec::new();
    let mut start = 0;
    loop {
        if start + block >= n {
            bounds.push((n - block, n));
            break;
        }
        bounds.push((start, start + block));
        start += step;
    }
    bounds
}

/// Motion removal over a whole channel, processed in overlapping blocks that
/// are cross-faded with raised-cosine ramps.
/// `offset_s` is the time of `signal[0]` on the IMU clock.
pub fn denoise_channel<T: Real>(
    signal: &[T],
    sample_rate: f64,
    imu: &Imu,
    offset_s: f64,
    cfg: &DenoiseConfig,
) -> Result<DenoiseOutput<T>> {
    let n = signal.len();
    let block = (cfg.block_s * sample_rate).round() as usize;
    let overlap = (cfg.overlap_s * sample_rate).round() as usize;
    let bounds = block_bounds(n, block.max(2 * cfg.vmd.k_modes), overlap);
    let mut out = vec![T::zero(); n];
    let mut weight = vec![0.0f64; n];
    let mut reports = Vec::with_capacity(bounds.len());

    for (b, &(start, end)) in bounds.iter().enumerate() {
        let seg = &signal[start..end];
        let result = vmd_decompose(seg, sample_rate, &cfg.vmd)?;
        let seg_offset = offset_s + start as f64 / sample_rate;
        let corr = if imu.len() >= 2 {
            let (env, accel) = mode_envelopes(&result, sample_rate, imu, seg_offset);
            if accel.len() >= 2 {
                correlate_envelopes(&env, &accel, cfg.corr_threshold)
            } else {
                MotionCorrelation { r: vec![0.0; result.modes.len()], threshold: cfg.corr_threshold }
            }
        } else {
            MotionCorrelation { r: vec![0.0; result.modes.len()], threshold: cfg.corr_threshold }
        };
        let rec = reconstruct_excluding_motion(&result, &corr)?;

        // raised-cosine ramps over the overlaps, normalized below so the weights sum to one
        let fade_in = if b > 0 { bounds[b - 1].1.saturating_sub(start).min(end - start) } else { 0 };
        let fade_out = bounds.get(b + 1).map_or(0, |next| end.saturating_sub(next.0).min(end - start));
        for (i, v) in rec.signal.iter().enumerate() {
            let mut w = 1.0;
            if i < fade_in {
                w *= ramp(i, fade_in);
            }
            let from_end = end - start - 1 - i;
            if from_end < fade_out {
                w *= ramp(from_end, fade_out);
            }
            out[start + i] = out[start + i] + *v * T::lit(w);
            weight[start + i] += w;
        }
        reports.push(BlockReport {
            start_s: start as f64 / sample_rate,
            end_s: end as f64 / sample_rate,
            excluded: corr.excluded(),
            center_freqs: result.center_freqs,
            r: corr.r,
            converged: result.converged,
        });
    }
    for (o, w) in out.iter_mut().zip(&weight) {
        if *w > 0.0 && *w != 1.0 {
            *o = *o / T::lit(*w);
        }
    }
    Ok(DenoiseOutput { signal: out, blocks: reports })
}

/// Rising raised-cosine weight for position `i` of a ramp of `len` samples;
/// `ramp(i) + ramp(len - 1 - i) == 1`.
fn ramp(i: usize, len: usize) -> f64 {
    let x = (i as f64 + 0.5) / len as f64;
    (std::f64::consts::FRAC_PI_2 * x).sin().powi(2)
}
