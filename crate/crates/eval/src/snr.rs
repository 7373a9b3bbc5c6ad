//! Band signal-to-noise ratio: mean in-band PSD over mean out-of-band PSD,
//! with the PSD estimated by Welch averaging of 1 s Hann segments at 50 %
//! overlap, computed per 10 s epoch.

use earpipe_core::features::WINDOW_S;
use earpipe_core::signals::Band;
use earpipe_core::spectral::welch_psd;
use serde::{Deserialize, Serialize};

use crate::error::{EvalError, Result};

/// Floor for the out-of-band power so silent spectra stay finite.
pub const POWER_FLOOR: f64 = 1e-30;

fn check_band(band: Band, sample_rate: f64) -> Result<()> {
    let nyq = sample_rate / 2.0;
    if !(band.lo >= 0.0 && band.lo < band.hi && band.hi <= nyq) {
        return Err(EvalError::config(format!(
            "band [{}, {}] must satisfy 0 <= lo < hi <= {nyq}",
            band.lo, band.hi
        )));
    }
    Ok(())
}

/// SNR of `signal` in `band`, in dB.
pub fn snr(signal: &[f64], band: Band, sample_rate: f64) -> Result<f64> {
    check_band(band, sample_rate)?;
    if signal.len() < 2 {
        return Err(EvalError::config("snr needs at least two samples"));
    }
    let seg = (sample_rate.round() as usize).min(signal.len());
    let (freqs, psd) = welch_psd(signal, sample_rate, seg, seg / 2);
    let (mut sin, mut nin, mut sout, mut nout) = (0.0, 0usize, 0.0, 0usize);
    for (f, p) in freqs.iter().zip(&psd) {
        if band.contains(*f) {
            sin += p;
            nin += 1;
        } else {
            sout += p;
            nout += 1;
        }
    }
    if nout == 0 {
        return Err(EvalError::config(format!(
            "band [{}, {}] covers the whole spectrum; nothing is out of band",
            band.lo, band.hi
        )));
    }
    if nin == 0 {
        return Err(EvalError::config(format!(
            "band [{}, {}] contains no frequency bin at this resolution",
            band.lo, band.hi
        )));
    }
    let pin = sin / nin as f64;
    let pout = (sout / nout as f64).max(POWER_FLOOR);
    Ok(10.0 * (pin.max(POWER_FLOOR) / pout).log10())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrReport {
    pub band: (f64, f64),
    pub epoch_db: Vec<f64>,
    pub mean_db: f64,
}

/// Per-epoch SNR over non-overlapping 10 s epochs; a trailing partial epoch is
/// dropped unless the signal is shorter than one epoch.
pub fn snr_report(signal: &[f64], band: Band, sample_rate: f64) -> Result<SnrReport> {
    let epoch = (WINDOW_S * sample_rate).round() as usize;
    let epoch_db = if signal.len() < epoch {
        vec![snr(signal, band, sample_rate)?]
    } else {
        signal
            .chunks_exact(epoch)
            .map(|c| snr(c, band, sample_rate))
            .collect::<Result<Vec<f64>>>()?
    };
    let mean_db = epoch_db.iter().sum::<f64>() / epoch_db.len() as f64;
    Ok(SnrReport {
        band: (band.lo, band.hi),
        epoch_db,
        mean_db,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnrComparison {
    pub raw: SnrReport,
    pub reconstructed: SnrReport,
    /// Reconstructed minus raw mean SNR.
    pub delta_db: f64,
}

pub fn compare_snr(raw: &[f64], reconstructed: &[f64], bands: &[Band], sample_rate: f64) -> Result<Vec<SnrComparison>> {
    if raw.len() != reconstructed.len() {
        return Err(EvalError::Core(earpipe_core::CoreError::LengthMismatch(format!(
            "raw has {} samples, reconstruction {}",
            raw.len(),
            reconstructed.len()
        ))));
    }
    bands
        .iter()
        .map(|&b| {
            let r = snr_report(raw, b, sample_rate)?;
            let c = snr_report(reconstructed, b, sample_rate)?;
            Ok(SnrComparison {
                delta_db: c.mean_db - r.mean_db,
                raw: r,
                reconstructed: c,
            })
        })
        .collect()
}
