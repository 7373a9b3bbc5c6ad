//! Per-recording processing: conditioning, optional motion removal, source
//! separation into the six canonical channels, then windowing and features.

use earpipe_core::emd::{assign_modalities, emd_decompose};
use earpipe_core::features::{feature_names, feature_vector, segment, FeatureRow, FeatureTable, LabeledEpoch};
use earpipe_core::motion::denoise_channel;
use earpipe_core::nnmf::{separate, train_templates, FrequencyTemplate, NnmfConfig};
use earpipe_core::preprocess::preprocess_channel;
use earpipe_core::signals::{ChannelRole, Modality, Recording, Side};
use rayon::prelude::*;

use crate::config::{derive_seed, seed_tag, ExperimentConfig, FeatureConfig, PipelineConfig, SeparationMethod};
use crate::corpus::template_sources;
use crate::error::{EvalError, Result};

/// Conditioning and, when enabled, motion removal of one mixed channel.
pub fn clean_channel(x: &[f64], rec: &Recording, cfg: &PipelineConfig) -> Result<Vec<f64>> {
    let y = preprocess_channel(x, rec.sample_rate, &cfg.effective_preprocess())?;
    if !cfg.motion_removal {
        return Ok(y);
    }
    Ok(denoise_channel(&y, rec.sample_rate, &rec.imu, 0.0, &cfg.denoise)?.signal)
}

/// (EEG, EOG, EMG) estimates from one cleaned channel.
pub fn separate_channel(
    x: &[f64],
    sample_rate: f64,
    cfg: &PipelineConfig,
    template: Option<&FrequencyTemplate<f64>>,
) -> Result<[Vec<f64>; 3]> {
    match cfg.separation {
        SeparationMethod::Nnmf => {
            let t = template.ok_or_else(|| EvalError::config("nnmf separation needs frequency templates"))?;
            let s = separate(x, sample_rate, t, &cfg.stft, &cfg.nnmf)?;
            Ok([s.eeg, s.eog, s.emg])
        }
        SeparationMethod::Emd => {
            let a = assign_modalities(&emd_decompose(x, &cfg.emd)?);
            if a.degenerate_eeg {
                log::warn!("fewer than three IMFs; EEG channel is zero");
            }
            Ok([a.eeg, a.eog, a.emg])
        }
    }
}

/// Replaces the two mixed channels with the six separated ones.
pub fn separate_recording(
    rec: &Recording,
    cfg: &PipelineConfig,
    template: Option<&FrequencyTemplate<f64>>,
) -> Result<Recording> {
    let mut sides = Vec::with_capacity(2);
    for (role, side) in [(ChannelRole::MixedLeft, Side::Left), (ChannelRole::MixedRight, Side::Right)] {
        let x = rec
            .channel(role)
            .ok_or_else(|| EvalError::config(format!("{} lacks channel {}", rec.patient_id, role.name())))?;
        let clean = clean_channel(x, rec, cfg)?;
        sides.push((side, separate_channel(&clean, rec.sample_rate, cfg, template)?));
    }
    let mut channels = Vec::with_capacity(6);
    for role in ChannelRole::SEPARATED {
        let (_, parts) = sides.iter().find(|(s, _)| Some(*s) == role.side()).expect("both sides present");
        let m = Modality::ALL
            .into_iter()
            .find(|m| m.role(role.side().expect("separated roles have a side")) == role)
            .expect("every separated role has a modality");
        let idx = Modality::ALL.iter().position(|x| *x == m).expect("modality listed");
        channels.push((role, parts[idx].clone()));
    }
    Ok(rec.with_channels(channels)?)
}

/// Templates from `cfg.paths.templates`, or trained on the synthetic donor.
pub fn load_or_train_templates(cfg: &ExperimentConfig) -> Result<Option<FrequencyTemplate<f64>>> {
    if cfg.pipeline.separation != SeparationMethod::Nnmf {
        return Ok(None);
    }
    if let Some(path) = &cfg.paths.templates {
        return Ok(Some(earpipe_core::nnmf::load_templates(path)?));
    }
    let sources = template_sources(&cfg.corpus, derive_seed(cfg.rng_seed, seed_tag::TEMPLATE_DONOR))?;
    let nnmf = NnmfConfig {
        rng_seed: cfg.pipeline.nnmf.rng_seed,
        ..cfg.pipeline.nnmf.clone()
    };
    Ok(Some(train_templates(
        &sources,
        earpipe_core::signals::DEFAULT_SAMPLE_RATE,
        &cfg.pipeline.stft,
        &nnmf,
    )?))
}

pub fn separate_all(
    recs: &[Recording],
    cfg: &PipelineConfig,
    template: Option<&FrequencyTemplate<f64>>,
) -> Result<Vec<Recording>> {
    recs.par_iter()
        .map(|r| separate_recording(r, cfg, template).map_err(|e| e.context(format!("processing {}", r.patient_id))))
        .collect()
}

/// Windows of every separated recording, in recording order.
pub fn epochs(recs: &[Recording], cfg: &FeatureConfig) -> Result<Vec<LabeledEpoch>> {
    let spec = cfg.window()?;
    let mut out = Vec::new();
    for r in recs {
        out.extend(segment(r, &spec)?);
    }
    Ok(out)
}

pub fn feature_table(recs: &[Recording], cfg: &FeatureConfig) -> Result<FeatureTable> {
    let spec = cfg.window()?;
    let per_rec = recs
        .par_iter()
        .map(|r| {
            segment(r, &spec)?
                .iter()
                .map(|e| {
                    Ok(FeatureRow {
                        values: feature_vector(e, &cfg.mfcc)?.values,
                        label: e.label,
                        patient_id: e.patient_id.clone(),
                        start_s: e.start_s,
                    })
                })
                .collect::<Result<Vec<FeatureRow>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureTable {
        names: feature_names(),
        rows: per_rec.into_iter().flatten().collect(),
    })
}
