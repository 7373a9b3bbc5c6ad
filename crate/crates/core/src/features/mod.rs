//! Epoching, seizure labeling, class balancing, the per-epoch feature vector
//! and fold-local normalization.

mod extract;
mod normalize;
mod table;

pub use extract::{
    feature_names, feature_vector, mfcc_features, time_features, FeatureVector, MfccConfig, FEATURES_PER_CHANNEL,
    FEATURE_LEN, MFCC_PER_CHANNEL, TIME_FEATURES, TIME_FEATURE_NAMES,
};
pub use normalize::{apply_normalizer, fit_normalizer, NormalizationMode, NormalizationParams};
pub use table::{read_feature_csv, write_feature_csv, FeatureRow, FeatureTable};

use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::rng::stream;
use crate::signals::{ChannelRole, Recording, SeizureAnnotation, MIN_EVENT_S};

/// Epoch length in seconds.
pub const WINDOW_S: f64 = MIN_EVENT_S;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub stride_s: u32,
}

impl Default for WindowSpec {
    fn default() -> Self {
        WindowSpec { stride_s: 1 }
    }
}

impl WindowSpec {
    pub fn new(stride_s: u32) -> Result<Self> {
        let w = WindowSpec { stride_s };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=9).contains(&self.stride_s) {
            return Err(CoreError::param(format!("stride must be 1..=9 s (got {})", self.stride_s)));
        }
        Ok(())
    }

    /// Number of windows that fit in `duration_s`: `floor((T - 10) / stride) + 1`.
    pub fn count(&self, duration_s: f64) -> usize {
        if duration_s + 1e-9 < WINDOW_S {
            return 0;
        }
        (((duration_s - WINDOW_S) / self.stride_s as f64) + 1e-9).floor() as usize + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    NonSeizure,
    Seizure,
}

impl Label {
    pub fn id(self) -> u8 {
        match self {
            Label::NonSeizure => 0,
            Label::Seizure => 1,
        }
    }

    pub fn from_id(id: u8) -> Result<Label> {
        match id {
            0 => Ok(Label::NonSeizure),
            1 => Ok(Label::Seizure),
            other => Err(CoreError::param(format!("label id must be 0 or 1 (got {other})"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::NonSeizure => "non_seizure",
            Label::Seizure => "seizure",
        }
    }
}

/// Seizure iff the window lies entirely within one annotated event.
pub fn label_window(start_s: f64, end_s: f64, annotations: &[SeizureAnnotation]) -> Label {
    if annotations.iter().any(|a| a.covers(start_s, end_s)) {
        Label::Seizure
    } else {
        Label::NonSeizure
    }
}

/// A 10 s window of the six separated channels in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEpoch {
    pub patient_id: String,
    pub start_s: f64,
    pub channels: Vec<Vec<f64>>,
    pub label: Label,
}

pub fn segment(rec: &Recording, spec: &WindowSpec) -> Result<Vec<LabeledEpoch>> {
    spec.validate()?;
    let channels: Vec<&[f64]> = ChannelRole::SEPARATED
        .iter()
        .map(|r| {
            rec.channel(*r)
                .ok_or_else(|| CoreError::param(format!("recording lacks separated channel {}", r.name())))
        })
        .collect::<Result<_>>()?;
    let fs = rec.sample_rate;
    let win = (WINDOW_S * fs).round() as usize;
    let duration = rec.duration();
    if duration + 1e-9 < WINDOW_S {
        return Err(CoreError::param(format!("recording of {duration} s is shorter than one window")));
    }
    let count = spec.count(duration);
    let mut out = Vec::with_capacity(count);
    for k in 0..count {
        let start_s = (k as u64 * spec.stride_s as u64) as f64;
        let a = (start_s * fs).round() as usize;
        let b = a + win;
        if b > rec.len() {
            break;
        }
        out.push(LabeledEpoch {
            patient_id: rec.patient_id.clone(),
            start_s,
            channels: channels.iter().map(|c| c[a..b].to_vec()).collect(),
            label: label_window(start_s, start_s + WINDOW_S, &rec.annotations),
        });
    }
    Ok(out)
}

/// Seizure to non-seizure proportion `1:k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BalanceRatio(pub u32);

impl Default for BalanceRatio {
    fn default() -> Self {
        BalanceRatio(1)
    }
}

impl BalanceRatio {
    pub const ALL: [BalanceRatio; 3] = [BalanceRatio(1), BalanceRatio(2), BalanceRatio(3)];
}

impl fmt::Display for BalanceRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "1:{}", self.0)
    }
}

impl FromStr for BalanceRatio {
    type Err = CoreError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || CoreError::param(format!("ratio must look like 1:k with k in 1..=3 (got {s:?})"));
        let (a, b) = s.split_once(':').ok_or_else(bad)?;
        if a.trim() != "1" {
            return Err(bad());
        }
        let k: u32 = b.trim().parse().map_err(|_| bad())?;
        if !(1..=3).contains(&k) {
            return Err(bad());
        }
        Ok(BalanceRatio(k))
    }
}

impl Serialize for BalanceRatio {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for BalanceRatio {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct BalanceSpec {
    pub ratio: BalanceRatio,
    pub rng_seed: u64,
}

/// Indices (ascending) of a subsample with exactly `1:k` seizure to
/// non-seizure items.
///
/// When non-seizure items are plentiful every seizure item is kept. Otherwise
/// every non-seizure item is kept if `k` divides their count; the seizure side
/// is cut to `floor(n_non / k)` and the non-seizure side to `k` times that.
pub fn balance_indices(labels: &[Label], spec: &BalanceSpec) -> Result<Vec<usize>> {
    let seizure: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == Label::Seizure).collect();
    let normal: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == Label::NonSeizure).collect();
    if seizure.is_empty() || normal.is_empty() {
        return Err(CoreError::Degenerate(format!(
            "balancing needs both classes (seizure {}, non-seizure {})",
            seizure.len(),
            normal.len()
        )));
    }
    let k = spec.ratio.0 as usize;
    let (n_sz, n_non) = if normal.len() >= k * seizure.len() {
        (seizure.len(), k * seizure.len())
    } else {
        let s = normal.len() / k;
        if s == 0 {
            return Err(CoreError::Degenerate(format!(
                "{} non-seizure items cannot satisfy ratio {}",
                normal.len(),
                spec.ratio
            )));
        }
        (s, k * s)
    };
    let mut rng = stream(spec.rng_seed, 0x0ba1);
    let mut pick = |pool: &[usize], n: usize| -> Vec<usize> {
        if n == pool.len() {
            pool.to_vec()
        } else {
            sample(&mut rng, pool.len(), n).into_iter().map(|i| pool[i]).collect()
        }
    };
    let mut out = pick(&seizure, n_sz);
    out.extend(pick(&normal, n_non));
    out.sort_unstable();
    Ok(out)
}

pub fn balance(epochs: Vec<LabeledEpoch>, spec: &BalanceSpec) -> Result<Vec<LabeledEpoch>> {
    let labels: Vec<Label> = epochs.iter().map(|e| e.label).collect();
    let keep = balance_indices(&labels, spec)?;
    let mut slots: Vec<Option<LabeledEpoch>> = epochs.into_iter().map(Some).collect();
    Ok(keep.into_iter().map(|i| slots[i].take().expect("indices are unique")).collect())
}
