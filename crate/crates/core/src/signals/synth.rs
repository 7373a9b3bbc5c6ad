//! Deterministic synthetic recordings that stand in for clinical data.
//!
//! Every component is rendered from its own ChaCha stream derived from the
//! spec seed, so adding a component never perturbs the others.

use std::f64::consts::PI;

use num_complex::Complex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{ChannelRole, Imu, Modality, Recording, SeizureAnnotation, MIN_EVENT_S};
use crate::error::{CoreError, Result};
use crate::rng::stream;

pub const SYNTHETIC_SEIZURE_LABEL: &str = "synthetic";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentKind {
    Tone,
    AlphaBurst,
    Blink,
    Chew,
    MotionBurst,
    SpikeWaveSeizure,
    WhiteNoise,
}

impl ComponentKind {
    fn default_frequency(self) -> f64 {
        match self {
            ComponentKind::Tone | ComponentKind::AlphaBurst => 10.0,
            ComponentKind::Blink => 0.25,
            ComponentKind::Chew => 1.5,
            ComponentKind::MotionBurst => 0.0,
            ComponentKind::SpikeWaveSeizure => 3.0,
            ComponentKind::WhiteNoise => 0.0,
        }
    }

    fn default_band(self) -> (f64, f64) {
        match self {
            ComponentKind::Chew => (20.0, 90.0),
            ComponentKind::MotionBurst => (0.5, 6.0),
            _ => (0.0, 0.0),
        }
    }

    fn modality(self) -> Option<Modality> {
        match self {
            ComponentKind::Tone | ComponentKind::AlphaBurst | ComponentKind::SpikeWaveSeizure => {
                Some(Modality::Eeg)
            }
            ComponentKind::Blink => Some(Modality::Eog),
            ComponentKind::Chew => Some(Modality::Emg),
            ComponentKind::MotionBurst | ComponentKind::WhiteNoise => None,
        }
    }
}

/// One additive source. `frequency` is the tone/rhythm frequency or the
/// event rate (blinks, chewing bursts); `band` bounds noise-based sources.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthComponent {
    pub kind: ComponentKind,
    /// Peak amplitude in mV (RMS for noise-based sources).
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<(f64, f64)>,
    pub start: f64,
    pub stop: f64,
    /// Per-channel gain; all ones when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<Vec<f64>>,
}

impl SynthComponent {
    pub fn new(kind: ComponentKind, amplitude: f64, start: f64, stop: f64) -> Self {
        SynthComponent {
            kind,
            amplitude,
            frequency: None,
            band: None,
            start,
            stop,
            gains: None,
        }
    }

    pub fn with_frequency(mut self, hz: f64) -> Self {
        self.frequency = Some(hz);
        self
    }

    pub fn with_band(mut self, lo: f64, hi: f64) -> Self {
        self.band = Some((lo, hi));
        self
    }

    pub fn with_gains(mut self, gains: Vec<f64>) -> Self {
        self.gains = Some(gains);
        self
    }

    fn frequency(&self) -> f64 {
        self.frequency.unwrap_or_else(|| self.kind.default_frequency())
    }

    fn band(&self) -> (f64, f64) {
        self.band.unwrap_or_else(|| self.kind.default_band())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisSpec {
    #[serde(default = "default_patient")]
    pub patient_id: String,
    pub duration: f64,
    #[serde(default = "default_rate")]
    pub sample_rate: f64,
    #[serde(default = "default_imu_rate")]
    pub imu_rate: f64,
    #[serde(default = "default_channels")]
    pub channels: Vec<ChannelRole>,
    pub components: Vec<SynthComponent>,
    pub rng_seed: u64,
}

fn default_patient() -> String {
    "synthetic".to_string()
}
fn default_rate() -> f64 {
    super::DEFAULT_SAMPLE_RATE
}
fn default_imu_rate() -> f64 {
    super::DEFAULT_IMU_RATE
}
fn default_channels() -> Vec<ChannelRole> {
    ChannelRole::MIXED.to_vec()
}

impl SynthesisSpec {
    pub fn new(duration: f64, components: Vec<SynthComponent>, rng_seed: u64) -> Self {
        SynthesisSpec {
            patient_id: default_patient(),
            duration,
            sample_rate: default_rate(),
            imu_rate: default_imu_rate(),
            channels: default_channels(),
            components,
            rng_seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return Err(CoreError::param("duration must be positive"));
        }
        if !(self.sample_rate > 0.0) || !(self.imu_rate > 0.0) {
            return Err(CoreError::param("sample rates must be positive"));
        }
        if self.channels.is_empty() {
            return Err(CoreError::param("at least one channel required"));
        }
        for (i, c) in self.components.iter().enumerate() {
            let ctx = |m: &str| CoreError::param(format!("component {i} ({:?}): {m}", c.kind));
            if !(c.start >= 0.0 && c.start < c.stop && c.stop <= self.duration + 1e-9) {
                return Err(ctx("interval must satisfy 0 <= start < stop <= duration"));
            }
            if !(c.amplitude >= 0.0 && c.amplitude.is_finite()) {
                return Err(ctx("amplitude must be finite and nonnegative"));
            }
            if let Some(g) = &c.gains {
                if g.len() != self.channels.len() {
                    return Err(ctx("gains length differs from channel count"));
                }
            }
            let nyq = self.sample_rate / 2.0;
            match c.kind {
                ComponentKind::Chew | ComponentKind::MotionBurst => {
                    let (lo, hi) = c.band();
                    if !(0.0 <= lo && lo < hi && hi < nyq) {
                        return Err(ctx("band must satisfy 0 <= lo < hi < nyquist"));
                    }
                }
                ComponentKind::SpikeWaveSeizure if c.stop - c.start < MIN_EVENT_S => {
                    return Err(ctx("seizure shorter than the minimum event length"));
                }
                _ => {}
            }
            if !matches!(c.kind, ComponentKind::MotionBurst | ComponentKind::WhiteNoise)
                && !(c.frequency() > 0.0 && c.frequency() < nyq)
            {
                return Err(ctx("frequency must lie in (0, nyquist)"));
            }
        }
        Ok(())
    }
}

/// Per-channel ground truth split by source class.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelTruth {
    pub eeg: Vec<f64>,
    pub eog: Vec<f64>,
    pub emg: Vec<f64>,
    pub motion: Vec<f64>,
    pub noise: Vec<f64>,
}

impl ChannelTruth {
    fn zeros(n: usize) -> Self {
        ChannelTruth {
            eeg: vec![0.0; n],
            eog: vec![0.0; n],
            emg: vec![0.0; n],
            motion: vec![0.0; n],
            noise: vec![0.0; n],
        }
    }

    pub fn modality(&self, m: Modality) -> &[f64] {
        match m {
            Modality::Eeg => &self.eeg,
            Modality::Eog => &self.eog,
            Modality::Emg => &self.emg,
        }
    }

    fn slot(&mut self, kind: ComponentKind) -> &mut Vec<f64> {
        match (kind.modality(), kind) {
            (Some(Modality::Eeg), _) => &mut self.eeg,
            (Some(Modality::Eog), _) => &mut self.eog,
            (Some(Modality::Emg), _) => &mut self.emg,
            (None, ComponentKind::MotionBurst) => &mut self.motion,
            (None, _) => &mut self.noise,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisTruth {
    /// One entry per spec channel, same order.
    pub channels: Vec<ChannelTruth>,
    /// Motion envelope in [0, 1] at the biopotential rate.
    pub motion_envelope: Vec<f64>,
}

pub fn synthesize_recording(spec: &SynthesisSpec) -> Result<Recording> {
    synthesize_with_truth(spec).map(|(rec, _)| rec)
}

pub fn synthesize_with_truth(spec: &SynthesisSpec) -> Result<(Recording, SynthesisTruth)> {
    spec.validate()?;
    let fs = spec.sample_rate;
    let n = (spec.duration * fs).round() as usize;
    let n_imu = (spec.duration * spec.imu_rate).round() as usize;
    let n_ch = spec.channels.len();
    let mut truth = vec![ChannelTruth::zeros(n); n_ch];
    let mut envelope = vec![0.0; n];
    let mut imu_envelope = vec![0.0; n_imu];
    let mut annotations = Vec::new();

    for (ci, comp) in spec.components.iter().enumerate() {
        let mut rng = stream(spec.rng_seed, ci as u64 + 1);
        let i0 = ((comp.start * fs).ceil() as usize).min(n);
        let i1 = ((comp.stop * fs).ceil() as usize).min(n);
        let t = |i: usize| i as f64 / fs;
        let gains = comp.gains.clone().unwrap_or_else(|| vec![1.0; n_ch]);

        if comp.kind == ComponentKind::WhiteNoise {
            for (ch, g) in truth.iter_mut().zip(&gains) {
                for v in &mut ch.noise[i0..i1] {
                    let z: f64 = rng.sample(StandardNormal);
                    *v += g * comp.amplitude * z;
                }
            }
            continue;
        }

        let wave: Vec<f64> = match comp.kind {
            ComponentKind::Tone => {
                let f = comp.frequency();
                (i0..i1).map(|i| comp.amplitude * (2.0 * PI * f * t(i)).sin()).collect()
            }
            ComponentKind::AlphaBurst => {
                let f = comp.frequency();
                let phase = rng.random::<f64>() * 2.0 * PI;
                let mod_phase = rng.random::<f64>() * 2.0 * PI;
                (i0..i1)
                    .map(|i| {
                        let tt = t(i);
                        let am = 1.0 + 0.3 * (2.0 * PI * 0.2 * tt + mod_phase).sin();
                        comp.amplitude
                            * tukey(tt, comp.start, comp.stop, 0.5)
                            * am
                            * (2.0 * PI * f * tt + phase).sin()
                    })
                    .collect()
            }
            ComponentKind::Blink => {
                let events = poisson_like_events(&mut rng, comp.start, comp.stop, comp.frequency());
                let sigma = 0.1;
                (i0..i1)
                    .map(|i| {
                        let tt = t(i);
                        events
                            .iter()
                            .map(|&e| {
                                let d = (tt - e) / sigma;
                                if d.abs() < 6.0 { (-0.5 * d * d).exp() } else { 0.0 }
                            })
                            .sum::<f64>()
                            * comp.amplitude
                    })
                    .collect()
            }
            ComponentKind::Chew => {
                let (lo, hi) = comp.band();
                let carrier = bandlimited_noise(i1 - i0, fs, lo, hi, &mut rng);
                let events = poisson_like_events(&mut rng, comp.start, comp.stop, comp.frequency());
                let half = 0.175;
                (i0..i1)
                    .zip(carrier)
                    .map(|(i, c)| {
                        let tt = t(i);
                        let env: f64 = events
                            .iter()
                            .map(|&e| {
                                let d = (tt - e).abs();
                                if d < half { (PI * d / (2.0 * half)).cos().powi(2) } else { 0.0 }
                            })
                            .sum();
                        comp.amplitude * env.min(1.0) * c
                    })
                    .collect()
            }
            ComponentKind::MotionBurst => {
                let (lo, hi) = comp.band();
                let bumps = motion_bumps(&mut rng, comp.start, comp.stop);
                let carrier = bandlimited_noise(i1 - i0, fs, lo, hi, &mut rng);
                for (i, e) in envelope.iter_mut().enumerate().take(i1).skip(i0) {
                    *e = (*e + bump_envelope(&bumps, t(i))).min(1.0);
                }
                let ti = |j: usize| j as f64 / spec.imu_rate;
                for (j, e) in imu_envelope.iter_mut().enumerate() {
                    let tt = ti(j);
                    if tt >= comp.start && tt < comp.stop {
                        *e = (*e + bump_envelope(&bumps, tt)).min(1.0);
                    }
                }
                (i0..i1)
                    .zip(carrier)
                    .map(|(i, c)| comp.amplitude * bump_envelope(&bumps, t(i)) * c)
                    .collect()
            }
            ComponentKind::SpikeWaveSeizure => {
                annotations.push(SeizureAnnotation::new(
                    comp.start,
                    comp.stop,
                    SYNTHETIC_SEIZURE_LABEL,
                ));
                let f = comp.frequency();
                let mut cycles = Vec::new();
                let mut tc = comp.start + 0.05;
                while tc < comp.stop {
                    cycles.push(tc);
                    let jitter: f64 = rng.random_range(-0.05..0.05);
                    tc += (1.0 + jitter) / f;
                }
                (i0..i1)
                    .map(|i| {
                        let tt = t(i);
                        let k = cycles.partition_point(|&c| c <= tt);
                        let mut v = 0.0;
                        for &c in &cycles[k.saturating_sub(2)..(k + 1).min(cycles.len())] {
                            let ds = (tt - c) / 0.012;
                            let dw = (tt - c - 0.12) / 0.06;
                            v += (-0.5 * ds * ds).exp() - 0.5 * (-0.5 * dw * dw).exp();
                        }
                        comp.amplitude * v * tukey(tt, comp.start, comp.stop, 0.25)
                    })
                    .collect()
            }
            ComponentKind::WhiteNoise => unreachable!("handled above"),
        };

        for (ch, g) in truth.iter_mut().zip(&gains) {
            let slot = ch.slot(comp.kind);
            for (dst, w) in slot[i0..i1].iter_mut().zip(&wave) {
                *dst += g * w;
            }
        }
    }

    let channels = spec
        .channels
        .iter()
        .zip(&truth)
        .map(|(role, tr)| {
            let mixed = (0..n)
                .map(|i| tr.eeg[i] + tr.eog[i] + tr.emg[i] + tr.motion[i] + tr.noise[i])
                .collect();
            (*role, mixed)
        })
        .collect();

    let mut rng = stream(spec.rng_seed, 0);
    let mut x = Vec::with_capacity(n_imu);
    let mut y = Vec::with_capacity(n_imu);
    let mut z = Vec::with_capacity(n_imu);
    for (j, e) in imu_envelope.iter().enumerate() {
        let tt = j as f64 / spec.imu_rate;
        let nx: f64 = rng.sample(StandardNormal);
        let ny: f64 = rng.sample(StandardNormal);
        let nz: f64 = rng.sample(StandardNormal);
        x.push(0.3 * e * (2.0 * PI * 1.5 * tt).sin() + 0.005 * nx);
        y.push(0.005 * ny);
        z.push(1.0 + 0.6 * e + 0.005 * nz);
    }

    let mut rec = Recording::new(
        spec.patient_id.clone(),
        fs,
        channels,
        Imu::new(spec.imu_rate, x, y, z),
        annotations,
    )?;
    rec.annotations
        .sort_by(|a, b| a.onset.total_cmp(&b.onset));
    Ok((
        rec,
        SynthesisTruth {
            channels: truth,
            motion_envelope: envelope,
        },
    ))
}

/// Cosine-tapered window equal to 1 inside `[start + ramp, stop - ramp]`.
fn tukey(t: f64, start: f64, stop: f64, ramp: f64) -> f64 {
    let ramp = ramp.min((stop - start) / 2.0);
    if t < start || t > stop {
        0.0
    } else if t < start + ramp {
        0.5 - 0.5 * (PI * (t - start) / ramp).cos()
    } else if t > stop - ramp {
        0.5 - 0.5 * (PI * (stop - t) / ramp).cos()
    } else {
        1.0
    }
}

/// Event times with jittered spacing around `1 / rate`.
fn poisson_like_events(rng: &mut ChaCha8Rng, start: f64, stop: f64, rate: f64) -> Vec<f64> {
    let mut events = Vec::new();
    let mean = 1.0 / rate;
    let mut t = start + rng.random::<f64>() * mean;
    while t < stop {
        events.push(t);
        t += mean * rng.random_range(0.5..1.5);
    }
    events
}

/// (center, half-width, height) of raised-cosine bumps.
fn motion_bumps(rng: &mut ChaCha8Rng, start: f64, stop: f64) -> Vec<(f64, f64, f64)> {
    let mut bumps = Vec::new();
    let mut t = start + rng.random_range(0.0..1.0);
    loop {
        let len: f64 = rng.random_range(1.5..4.0);
        if t + len > stop {
            break;
        }
        let height: f64 = rng.random_range(0.5..1.0);
        bumps.push((t + len / 2.0, len / 2.0, height));
        t += len + rng.random_range(0.5..3.0);
    }
    if bumps.is_empty() {
        let len = stop - start;
        bumps.push((start + len / 2.0, len / 2.0, 1.0));
    }
    bumps
}

fn bump_envelope(bumps: &[(f64, f64, f64)], t: f64) -> f64 {
    bumps
        .iter()
        .map(|&(c, hw, h)| {
            let d = (t - c).abs();
            if d < hw { h * (PI * d / (2.0 * hw)).cos().powi(2) } else { 0.0 }
        })
        .sum::<f64>()
        .min(1.0)
}

/// Unit-RMS Gaussian noise confined to `[lo, hi]` Hz by spectral shaping.
pub fn bandlimited_noise(n: usize, fs: f64, lo: f64, hi: f64, rng: &mut impl Rng) -> Vec<f64> {
    if n == 0 {
        return Vec::new();
    }
    let mut spec = vec![Complex::new(0.0, 0.0); n];
    for (k, bin) in spec.iter_mut().enumerate().take(n / 2 + 1).skip(1) {
        let f = k as f64 * fs / n as f64;
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        if f >= lo && f <= hi {
            *bin = Complex::new(re, im);
        }
    }
    for k in 1..n.div_ceil(2) {
        spec[n - k] = spec[k].conj();
    }
    if n % 2 == 0 {
        spec[n / 2] = Complex::new(spec[n / 2].re, 0.0);
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    let out: Vec<f64> = spec.iter().map(|c| c.re).collect();
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
    if rms > 0.0 {
        out.into_iter().map(|v| v / rms).collect()
    } else {
        out
    }
}
