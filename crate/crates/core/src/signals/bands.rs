//! Frequency bands of the biopotentials captured behind the ear.

use serde::{Deserialize, Serialize};

/// Named frequency band. Lookup of the limits is total over the enum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BandName {
    Delta,
    Theta,
    Alpha,
    Beta,
    Gamma,
    /// Full EEG range used for modality-level SNR (theta through beta).
    Eeg,
    Eog,
    Emg,
}

/// Band limits in Hz. `hi` may be `f64::INFINITY` for open-ended bands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
}

impl Band {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Band { lo, hi }
    }

    /// Upper edge clamped to the Nyquist frequency.
    pub fn clamp_to(&self, nyquist: f64) -> Band {
        Band::new(self.lo.min(nyquist), self.hi.min(nyquist))
    }

    pub fn contains(&self, f: f64) -> bool {
        f >= self.lo && f <= self.hi
    }
}

impl BandName {
    pub const ALL: [BandName; 8] = [
        BandName::Delta,
        BandName::Theta,
        BandName::Alpha,
        BandName::Beta,
        BandName::Gamma,
        BandName::Eeg,
        BandName::Eog,
        BandName::Emg,
    ];

    pub const fn band(self) -> Band {
        match self {
            BandName::Delta => Band::new(0.0, 3.0),
            BandName::Theta => Band::new(3.0, 8.0),
            BandName::Alpha => Band::new(8.0, 12.0),
            BandName::Beta => Band::new(12.0, 25.0),
            BandName::Gamma => Band::new(25.0, f64::INFINITY),
            BandName::Eeg => Band::new(3.0, 25.0),
            BandName::Eog => Band::new(0.3, 10.0),
            BandName::Emg => Band::new(10.0, 100.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BandName::Delta => "delta",
            BandName::Theta => "theta",
            BandName::Alpha => "alpha",
            BandName::Beta => "beta",
            BandName::Gamma => "gamma",
            BandName::Eeg => "eeg",
            BandName::Eog => "eog",
            BandName::Emg => "emg",
        }
    }

    pub fn from_name(name: &str) -> Option<BandName> {
        BandName::ALL
            .into_iter()
            .find(|b| b.name().eq_ignore_ascii_case(name))
    }
}
