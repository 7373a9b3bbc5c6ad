//! Recording types, the on-disk recording format and the synthetic generator.

mod bands;
mod format;
mod synth;

pub use bands::{Band, BandName};
pub use format::{load_recording, load_recording_with, save_recording, Encoding, LoadOptions};
pub use synth::{
    bandlimited_noise, synthesize_recording, synthesize_with_truth, ComponentKind,
    SynthComponent, SynthesisSpec, SynthesisTruth,
};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

/// Minimum seizure event length in seconds.
pub const MIN_EVENT_S: f64 = 10.0;

pub const DEFAULT_SAMPLE_RATE: f64 = 250.0;
pub const DEFAULT_IMU_RATE: f64 = 50.0;

/// Role of a channel in a recording.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ChannelRole {
    MixedLeft,
    MixedRight,
    EegLeft,
    EegRight,
    EmgLeft,
    EmgRight,
    EogLeft,
    EogRight,
    AccelX,
    AccelY,
    AccelZ,
}

/// Physiological source class of a separated channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Eeg,
    Eog,
    Emg,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Eeg, Modality::Eog, Modality::Emg];

    pub fn name(self) -> &'static str {
        match self {
            Modality::Eeg => "eeg",
            Modality::Eog => "eog",
            Modality::Emg => "emg",
        }
    }

    pub fn band(self) -> Band {
        match self {
            Modality::Eeg => BandName::Eeg.band(),
            Modality::Eog => BandName::Eog.band(),
            Modality::Emg => BandName::Emg.band(),
        }
    }

    pub fn role(self, side: Side) -> ChannelRole {
        match (self, side) {
            (Modality::Eeg, Side::Left) => ChannelRole::EegLeft,
            (Modality::Eeg, Side::Right) => ChannelRole::EegRight,
            (Modality::Emg, Side::Left) => ChannelRole::EmgLeft,
            (Modality::Emg, Side::Right) => ChannelRole::EmgRight,
            (Modality::Eog, Side::Left) => ChannelRole::EogLeft,
            (Modality::Eog, Side::Right) => ChannelRole::EogRight,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Left,
    Right,
}

impl ChannelRole {
    /// Canonical order of the six separated channels.
    pub const SEPARATED: [ChannelRole; 6] = [
        ChannelRole::EegLeft,
        ChannelRole::EegRight,
        ChannelRole::EmgLeft,
        ChannelRole::EmgRight,
        ChannelRole::EogLeft,
        ChannelRole::EogRight,
    ];

    pub const MIXED: [ChannelRole; 2] = [ChannelRole::MixedLeft, ChannelRole::MixedRight];

    pub fn name(self) -> &'static str {
        match self {
            ChannelRole::MixedLeft => "MixedLeft",
            ChannelRole::MixedRight => "MixedRight",
            ChannelRole::EegLeft => "EegLeft",
            ChannelRole::EegRight => "EegRight",
            ChannelRole::EmgLeft => "EmgLeft",
            ChannelRole::EmgRight => "EmgRight",
            ChannelRole::EogLeft => "EogLeft",
            ChannelRole::EogRight => "EogRight",
            ChannelRole::AccelX => "AccelX",
            ChannelRole::AccelY => "AccelY",
            ChannelRole::AccelZ => "AccelZ",
        }
    }

    /// snake_case label used in feature names.
    pub fn snake(self) -> &'static str {
        match self {
            ChannelRole::MixedLeft => "mixed_left",
            ChannelRole::MixedRight => "mixed_right",
            ChannelRole::EegLeft => "eeg_left",
            ChannelRole::EegRight => "eeg_right",
            ChannelRole::EmgLeft => "emg_left",
            ChannelRole::EmgRight => "emg_right",
            ChannelRole::EogLeft => "eog_left",
            ChannelRole::EogRight => "eog_right",
            ChannelRole::AccelX => "accel_x",
            ChannelRole::AccelY => "accel_y",
            ChannelRole::AccelZ => "accel_z",
        }
    }

    pub fn from_name(name: &str) -> Option<ChannelRole> {
        use ChannelRole::*;
        [
            MixedLeft, MixedRight, EegLeft, EegRight, EmgLeft, EmgRight, EogLeft, EogRight,
            AccelX, AccelY, AccelZ,
        ]
        .into_iter()
        .find(|r| r.name() == name)
    }

    pub fn side(self) -> Option<Side> {
        use ChannelRole::*;
        match self {
            MixedLeft | EegLeft | EmgLeft | EogLeft => Some(Side::Left),
            MixedRight | EegRight | EmgRight | EogRight => Some(Side::Right),
            AccelX | AccelY | AccelZ => None,
        }
    }
}

/// A labelled seizure event in seconds relative to the recording start.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeizureAnnotation {
    pub onset: f64,
    pub offset: f64,
    pub seizure_type: String,
}

impl SeizureAnnotation {
    pub fn new(onset: f64, offset: f64, seizure_type: impl Into<String>) -> Self {
        SeizureAnnotation {
            onset,
            offset,
            seizure_type: seizure_type.into(),
        }
    }

    pub fn duration(&self) -> f64 {
        self.offset - self.onset
    }

    /// True when `[start, end]` lies entirely within the event.
    pub fn covers(&self, start: f64, end: f64) -> bool {
        self.onset <= start && end <= self.offset
    }
}

/// Three-axis acceleration in g, sampled at its own rate.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Imu {
    pub rate: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl Imu {
    pub fn new(rate: f64, x: Vec<f64>, y: Vec<f64>, z: Vec<f64>) -> Self {
        Imu { rate, x, y, z }
    }

    pub fn empty(rate: f64) -> Self {
        Imu {
            rate,
            ..Imu::default()
        }
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Euclidean norm of the acceleration vector per sample.
    pub fn magnitude(&self) -> Vec<f64> {
        self.x
            .iter()
            .zip(&self.y)
            .zip(&self.z)
            .map(|((x, y), z)| (x * x + y * y + z * z).sqrt())
            .collect()
    }

    /// Sub-range covering `[start_s, end_s)` of the IMU timeline.
    pub fn slice_seconds(&self, start_s: f64, end_s: f64) -> Imu {
        if self.is_empty() {
            return Imu::empty(self.rate);
        }
        let a = ((start_s * self.rate).floor().max(0.0) as usize).min(self.len());
        let b = ((end_s * self.rate).ceil().max(0.0) as usize).clamp(a, self.len());
        Imu::new(
            self.rate,
            self.x[a..b].to_vec(),
            self.y[a..b].to_vec(),
            self.z[a..b].to_vec(),
        )
    }
}

/// Multichannel biopotential recording with IMU and annotations.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub patient_id: String,
    pub sample_rate: f64,
    pub channels: Vec<(ChannelRole, Vec<f64>)>,
    pub imu: Imu,
    pub annotations: Vec<SeizureAnnotation>,
    pub start_time: f64,
}

impl Recording {
    /// Builds a recording and validates every structural invariant.
    /// Short annotations are rejected; see [`Recording::new_with`].
    pub fn new(
        patient_id: impl Into<String>,
        sample_rate: f64,
        channels: Vec<(ChannelRole, Vec<f64>)>,
        imu: Imu,
        annotations: Vec<SeizureAnnotation>,
    ) -> Result<Self> {
        Self::new_with(patient_id, sample_rate, channels, imu, annotations, false)
    }

    pub fn new_with(
        patient_id: impl Into<String>,
        sample_rate: f64,
        channels: Vec<(ChannelRole, Vec<f64>)>,
        imu: Imu,
        annotations: Vec<SeizureAnnotation>,
        allow_short_events: bool,
    ) -> Result<Self> {
        let rec = Recording {
            patient_id: patient_id.into(),
            sample_rate,
            channels,
            imu,
            annotations,
            start_time: 0.0,
        };
        rec.validate(allow_short_events)?;
        Ok(rec)
    }

    pub fn validate(&self, allow_short_events: bool) -> Result<()> {
        if !(self.sample_rate > 0.0 && self.sample_rate.is_finite()) {
            return Err(CoreError::param(format!(
                "sample_rate must be positive, got {}",
                self.sample_rate
            )));
        }
        if let Some((_, first)) = self.channels.first() {
            for (role, samples) in &self.channels {
                if samples.len() != first.len() {
                    return Err(CoreError::LengthMismatch(format!(
                        "channel {} has {} samples, expected {}",
                        role.name(),
                        samples.len(),
                        first.len()
                    )));
                }
            }
        }
        for (i, (role, _)) in self.channels.iter().enumerate() {
            if self.channels[..i].iter().any(|(r, _)| r == role) {
                return Err(CoreError::param(format!("duplicate channel role {}", role.name())));
            }
        }
        let imu = &self.imu;
        if imu.y.len() != imu.x.len() || imu.z.len() != imu.x.len() {
            return Err(CoreError::LengthMismatch(format!(
                "imu axes have lengths {}/{}/{}",
                imu.x.len(),
                imu.y.len(),
                imu.z.len()
            )));
        }
        if !imu.is_empty() && !(imu.rate > 0.0) {
            return Err(CoreError::param("imu rate must be positive"));
        }
        let duration = self.duration();
        for a in &self.annotations {
            if !(a.onset < a.offset) {
                return Err(CoreError::param(format!(
                    "annotation onset {} not before offset {}",
                    a.onset, a.offset
                )));
            }
            if a.onset < 0.0 || a.offset > duration + 1e-9 {
                return Err(CoreError::param(format!(
                    "annotation [{}, {}] outside recording [0, {}]",
                    a.onset, a.offset, duration
                )));
            }
            if a.duration() < MIN_EVENT_S {
                if allow_short_events {
                    log::warn!(
                        "keeping annotation [{}, {}] shorter than {} s",
                        a.onset,
                        a.offset,
                        MIN_EVENT_S
                    );
                } else {
                    return Err(CoreError::param(format!(
                        "annotation [{}, {}] shorter than {} s",
                        a.onset, a.offset, MIN_EVENT_S
                    )));
                }
            }
        }
        Ok(())
    }

    /// Number of samples per biopotential channel.
    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, |(_, s)| s.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration(&self) -> f64 {
        self.len() as f64 / self.sample_rate
    }

    pub fn channel(&self, role: ChannelRole) -> Option<&[f64]> {
        self.channels
            .iter()
            .find(|(r, _)| *r == role)
            .map(|(_, s)| s.as_slice())
    }

    pub fn roles(&self) -> Vec<ChannelRole> {
        self.channels.iter().map(|(r, _)| *r).collect()
    }

    /// True when all six separated roles are present.
    pub fn is_separated(&self) -> bool {
        ChannelRole::SEPARATED.iter().all(|r| self.channel(*r).is_some())
    }

    /// Copy with the biopotential channels replaced, metadata kept.
    pub fn with_channels(&self, channels: Vec<(ChannelRole, Vec<f64>)>) -> Result<Recording> {
        let rec = Recording {
            channels,
            ..self.clone()
        };
        rec.validate(true)?;
        Ok(rec)
    }
}
