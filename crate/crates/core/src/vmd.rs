//! Variational mode decomposition.
//!
//! Frequency-domain alternating scheme on the mirror-extended signal: each
//! mode spectrum is a Wiener-like filter of the residual centred on the mode's
//! current frequency, and each centre frequency is the power centroid of its
//! mode. Frequencies are handled in cycles/sample internally and reported in Hz.

use num_complex::Complex;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::scalar::Real;
use crate::spectral::{fft_forward, fft_inverse, to_complex};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OmegaInit {
    /// `k / (2K)` of the sampling rate for mode `k`, spanning `[0, Nyquist)`.
    Uniform,
    Zero,
    /// Log-uniform random draw, sorted.
    Random(u64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VmdConfig {
    pub k_modes: usize,
    /// Bandwidth penalty.
    pub alpha: f64,
    /// Dual ascent step; 0 disables the exact-reconstruction constraint.
    pub tau: f64,
    /// Convergence threshold on the relative change of the mode spectra.
    pub tol: f64,
    pub max_iter: usize,
    pub init: OmegaInit,
}

impl Default for VmdConfig {
    fn default() -> Self {
        VmdConfig {
            k_modes: 8,
            alpha: 2000.0,
            tau: 0.0,
            tol: 1e-7,
            max_iter: 500,
            init: OmegaInit::Uniform,
        }
    }
}

impl VmdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_modes == 0 {
            return Err(CoreError::param("k_modes must be at least 1"));
        }
        if !(self.alpha > 0.0) || !(self.tol > 0.0) || !(self.tau >= 0.0) {
            return Err(CoreError::param("alpha and tol must be positive, tau nonnegative"));
        }
        if self.max_iter == 0 {
            return Err(CoreError::param("max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VmdResult<T> {
    /// Modes in ascending centre-frequency order, each as long as the input.
    pub modes: Vec<Vec<T>>,
    /// Centre frequency of each mode in Hz.
    pub center_freqs: Vec<f64>,
    /// `input - sum(modes)`.
    pub residual: Vec<T>,
    pub iterations_used: usize,
    pub converged: bool,
}

impl<T: Real> VmdResult<T> {
    pub fn mode_sum(&self) -> Vec<T> {
        let mut sum = vec![T::zero(); self.residual.len()];
        for m in &self.modes {
            for (s, v) in sum.iter_mut().zip(m) {
                *s = *s + *v;
            }
        }
        sum
    }
}

fn initial_omegas(cfg: &VmdConfig, n: usize) -> Vec<f64> {
    let k = cfg.k_modes;
    match cfg.init {
        OmegaInit::Uniform => (0..k).map(|i| 0.5 * i as f64 / k as f64).collect(),
        OmegaInit::Zero => vec![0.0; k],
        OmegaInit::Random(seed) => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let lo = (1.0 / n as f64).ln();
            let hi = 0.5f64.ln();
            let mut w: Vec<f64> = (0..k)
                .map(|_| (lo + (hi - lo) * rng.random::<f64>()).exp())
                .collect();
            w.sort_by(f64::total_cmp);
            w
        }
    }
}

pub fn vmd_decompose<T: Real>(signal: &[T], sample_rate: f64, cfg: &VmdConfig) -> Result<VmdResult<T>> {
    cfg.validate()?;
    let n = signal.len();
    let k = cfg.k_modes;
    if n < 2 * k {
        return Err(CoreError::param(format!(
            "signal of {n} samples too short for {k} modes"
        )));
    }
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::param("signal contains NaN or infinite samples"));
    }
    if !(sample_rate > 0.0) {
        return Err(CoreError::param("sample_rate must be positive"));
    }

    let mut omega = initial_omegas(cfg, n);
    if signal.iter().all(|v| v.is_zero()) {
        return Ok(VmdResult {
            modes: vec![vec![T::zero(); n]; k],
            center_freqs: omega.iter().map(|w| w * sample_rate).collect(),
            residual: vec![T::zero(); n],
            iterations_used: 0,
            converged: true,
        });
    }

    // mirror extension to 2n samples; the original occupies [half, half + n)
    let half = n / 2;
    let mut mirrored = Vec::with_capacity(2 * n);
    mirrored.extend(signal[..half].iter().rev());
    mirrored.extend_from_slice(signal);
    mirrored.extend(signal[half..].iter().rev());
    let m = mirrored.len();
    let mut spectrum = to_complex(&mirrored);
    fft_forward(&mut spectrum);

    // one-sided working spectrum, DC included, Nyquist dropped
    let p = m / 2;
    let f_hat = &spectrum[..p];
    let freqs: Vec<T> = (0..p).map(|j| T::lit(j as f64 / m as f64)).collect();
    let zero = Complex::new(T::zero(), T::zero());
    let alpha = T::lit(cfg.alpha);
    let tau = T::lit(cfg.tau);
    let half_t = T::lit(0.5);

    let mut modes = vec![vec![zero; p]; k];
    let mut lambda = vec![zero; p];
    let mut sum_all = vec![zero; p];
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iter {
        iterations += 1;
        let mut change = T::zero();
        let mut energy = T::zero();
        for (mode, w) in modes.iter_mut().zip(omega.iter_mut()) {
            let wk = T::lit(*w);
            let (mut num, mut den) = (T::zero(), T::zero());
            for j in 0..p {
                let others = sum_all[j] - mode[j];
                let d = freqs[j] - wk;
                let updated = (f_hat[j] - others - lambda[j] * half_t) / (T::one() + alpha * d * d);
                change = change + (updated - mode[j]).norm_sqr();
                let pw = updated.norm_sqr();
                energy = energy + pw;
                num = num + freqs[j] * pw;
                den = den + pw;
                mode[j] = updated;
                sum_all[j] = others + updated;
            }
            if den > T::zero() {
                *w = (num / den).as_f64();
            }
        }
        if tau > T::zero() {
            for j in 0..p {
                lambda[j] = lambda[j] + (sum_all[j] - f_hat[j]) * tau;
            }
        }
        if energy > T::zero() && change / energy < T::lit(cfg.tol) {
            converged = true;
            break;
        }
    }

    let mut out: Vec<(f64, Vec<T>)> = modes
        .iter()
        .zip(&omega)
        .map(|(mode, &w)| {
            let mut full = vec![zero; m];
            full[..p].copy_from_slice(mode);
            for j in 1..p {
                full[m - j] = mode[j].conj();
            }
            fft_inverse(&mut full);
            (w * sample_rate, full[half..half + n].iter().map(|c| c.re).collect())
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut residual = signal.to_vec();
    for (_, mode) in &out {
        for (r, v) in residual.iter_mut().zip(mode) {
            *r = *r - *v;
        }
    }
    if !converged {
        log::debug!("vmd stopped after {iterations} iterations without converging");
    }
    Ok(VmdResult {
        center_freqs: out.iter().map(|(w, _)| *w).collect(),
        modes: out.into_iter().map(|(_, m)| m).collect(),
        residual,
        iterations_used: iterations,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_signal_gives_zero_modes() {
        let r = vmd_decompose(&vec![0.0f64; 100], 250.0, &VmdConfig { k_modes: 3, ..Default::default() })
            .unwrap();
        assert_eq!(r.modes.len(), 3);
        assert!(r.modes.iter().flatten().all(|v| *v == 0.0));
        assert!(r.residual.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = VmdConfig { k_modes: 3, ..Default::default() };
        assert!(vmd_decompose(&[0.0f64; 5], 250.0, &cfg).is_err());
        let mut x = vec![0.0f64; 100];
        x[3] = f64::NAN;
        assert!(vmd_decompose(&x, 250.0, &cfg).is_err());
        assert!(vmd_decompose(&[0.0f64; 100], 250.0, &VmdConfig { k_modes: 0, ..cfg.clone() }).is_err());
    }

    #[test]
    fn non_convergence_is_flagged() {
        let x: Vec<f64> = (0..500).map(|i| (i as f64 * 0.3).sin() + (i as f64 * 0.05).cos()).collect();
        let cfg = VmdConfig { k_modes: 2, max_iter: 2, tol: 1e-15, ..Default::default() };
        let r = vmd_decompose(&x, 250.0, &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations_used, 2);
    }

    #[test]
    fn random_init_is_sorted_and_deterministic() {
        let cfg = VmdConfig { k_modes: 5, init: OmegaInit::Random(3), ..Default::default() };
        let a = initial_omegas(&cfg, 1000);
        assert_eq!(a, initial_omegas(&cfg, 1000));
        assert!(a.windows(2).all(|w| w[0] <= w[1]));
        assert!(a.iter().all(|w| (0.0..=0.5).contains(w)));
    }
}
