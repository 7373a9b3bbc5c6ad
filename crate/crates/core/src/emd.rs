//! Empirical mode decomposition by sifting, and the fixed IMF-to-modality map.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    /// Two extrema mirrored about each end of the signal.
    #[default]
    Mirror,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EmdConfig {
    pub max_imfs: usize,
    /// Sifting stops once `sum (h_prev - h)^2 / sum h_prev^2` drops below this.
    pub sd_threshold: f64,
    pub max_sift_iters: usize,
    pub boundary: Boundary,
}

impl Default for EmdConfig {
    fn default() -> Self {
        EmdConfig {
            max_imfs: 8,
            sd_threshold: 0.25,
            max_sift_iters: 100,
            boundary: Boundary::Mirror,
        }
    }
}

impl EmdConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_imfs == 0 || self.max_sift_iters == 0 {
            return Err(CoreError::param("max_imfs and max_sift_iters must be positive"));
        }
        if !(self.sd_threshold > 0.0) {
            return Err(CoreError::param("sd_threshold must be positive"));
        }
        if self.max_imfs < 6 {
            log::warn!("max_imfs = {} leaves the EOG assignment partial", self.max_imfs);
        }
        Ok(())
    }
}

/// IMFs from highest to lowest characteristic frequency plus the residual trend.
#[derive(Debug, Clone, PartialEq)]
pub struct ImfSet<T> {
    pub imfs: Vec<Vec<T>>,
    pub residual: Vec<T>,
}

impl<T: Real> ImfSet<T> {
    pub fn len(&self) -> usize {
        self.imfs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.imfs.is_empty()
    }

    pub fn reconstruct(&self) -> Vec<T> {
        let mut out = self.residual.clone();
        for imf in &self.imfs {
            for (o, v) in out.iter_mut().zip(imf) {
                *o = *o + *v;
            }
        }
        out
    }
}

/// Indices of local maxima and minima (interior samples only).
pub fn extrema<T: Real>(x: &[T]) -> (Vec<usize>, Vec<usize>) {
    let mut maxima = Vec::new();
    let mut minima = Vec::new();
    for i in 1..x.len().saturating_sub(1) {
        if x[i] > x[i - 1] && x[i] >= x[i + 1] {
            maxima.push(i);
        } else if x[i] < x[i - 1] && x[i] <= x[i + 1] {
            minima.push(i);
        }
    }
    (maxima, minima)
}

pub fn zero_crossings<T: Real>(x: &[T]) -> usize {
    x.windows(2)
        .filter(|w| (w[0] < T::zero() && w[1] >= T::zero()) || (w[0] > T::zero() && w[1] <= T::zero()))
        .count()
}

/// Natural cubic spline through `(t, y)` (strictly increasing `t`), evaluated at `0..n`.
fn natural_spline<T: Real>(t: &[f64], y: &[T], n: usize) -> Vec<T> {
    let m = t.len();
    let tt: Vec<T> = t.iter().map(|&v| T::lit(v)).collect();
    let two = T::lit(2.0);
    let six = T::lit(6.0);
    // second derivatives via the Thomas algorithm
    let mut second = vec![T::zero(); m];
    if m > 2 {
        let h: Vec<T> = tt.windows(2).map(|w| w[1] - w[0]).collect();
        let mut diag = vec![T::zero(); m - 2];
        let mut rhs = vec![T::zero(); m - 2];
        for i in 1..m - 1 {
            diag[i - 1] = two * (h[i - 1] + h[i]);
            rhs[i - 1] = six * ((y[i + 1] - y[i]) / h[i] - (y[i] - y[i - 1]) / h[i - 1]);
        }
        for i in 1..m - 2 {
            let w = h[i] / diag[i - 1];
            diag[i] = diag[i] - w * h[i];
            rhs[i] = rhs[i] - w * rhs[i - 1];
        }
        let k = m - 3;
        second[k + 1] = rhs[k] / diag[k];
        for i in (0..k).rev() {
            second[i + 1] = (rhs[i] - h[i + 1] * second[i + 2]) / diag[i];
        }
    }
    let mut seg = 0;
    (0..n)
        .map(|i| {
            let x = i as f64;
            while seg + 2 < m && t[seg + 1] < x {
                seg += 1;
            }
            let (x0, x1) = (tt[seg], tt[seg + 1]);
            let h = x1 - x0;
            let xv = T::lit(x);
            let a = (x1 - xv) / h;
            let b = (xv - x0) / h;
            a * y[seg]
                + b * y[seg + 1]
                + ((a * a * a - a) * second[seg] + (b * b * b - b) * second[seg + 1]) * h * h / six
        })
        .collect()
}

/// Spline envelope through the given extrema with two points mirrored at each end.
fn envelope<T: Real>(x: &[T], idx: &[usize]) -> Vec<T> {
    let n = x.len();
    let last = (n - 1) as f64;
    let mut pts: Vec<(f64, T)> = Vec::with_capacity(idx.len() + 4);
    for &i in idx.iter().take(2).rev() {
        pts.push((-(i as f64), x[i]));
    }
    pts.extend(idx.iter().map(|&i| (i as f64, x[i])));
    for &i in idx.iter().rev().take(2) {
        pts.push((2.0 * last - i as f64, x[i]));
    }
    let t: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let y: Vec<T> = pts.iter().map(|p| p.1).collect();
    natural_spline(&t, &y, n)
}

fn can_sift(maxima: &[usize], minima: &[usize]) -> bool {
    maxima.len() + minima.len() >= 4 && maxima.len() >= 2 && minima.len() >= 2
}

pub fn emd_decompose<T: Real>(signal: &[T], cfg: &EmdConfig) -> Result<ImfSet<T>> {
    cfg.validate()?;
    if signal.iter().any(|v| !v.is_finite()) {
        return Err(CoreError::param("signal contains NaN or infinite samples"));
    }
    let mut residual = signal.to_vec();
    let mut imfs = Vec::new();
    let thr = T::lit(cfg.sd_threshold);

    while imfs.len() < cfg.max_imfs {
        let (maxima, minima) = extrema(&residual);
        if !can_sift(&maxima, &minima) {
            break;
        }
        let mut h = residual.clone();
        for _ in 0..cfg.max_sift_iters {
            let (maxima, minima) = extrema(&h);
            if !can_sift(&maxima, &minima) {
                break;
            }
            let upper = envelope(&h, &maxima);
            let lower = envelope(&h, &minima);
            let half = T::lit(0.5);
            let mut num = T::zero();
            let mut den = T::zero();
            for ((v, u), l) in h.iter_mut().zip(&upper).zip(&lower) {
                let mean = (*u + *l) * half;
                num = num + mean * mean;
                den = den + *v * *v;
                *v = *v - mean;
            }
            let (maxima, minima) = extrema(&h);
            let n_ext = maxima.len() + minima.len();
            let zc = zero_crossings(&h);
            let is_imf = n_ext.abs_diff(zc) <= 1;
            if den > T::zero() && num / den < thr && is_imf {
                break;
            }
        }
        for (r, v) in residual.iter_mut().zip(&h) {
            *r = *r - *v;
        }
        imfs.push(h);
    }
    Ok(ImfSet { imfs, residual })
}

/// Per-modality signals drawn from fixed IMF indices (1-based):
/// EMG = IMF 1, EEG = IMF 3, EOG = IMF 4 + IMF 5 + IMF 6. IMF 2 is unused.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityAssignment<T> {
    pub emg: Vec<T>,
    pub eeg: Vec<T>,
    pub eog: Vec<T>,
    /// Fewer than six IMFs: the EOG sum stops at the last available IMF.
    pub partial_eog: bool,
    /// Fewer than three IMFs: EEG is all zeros.
    pub degenerate_eeg: bool,
}

pub fn assign_modalities<T: Real>(set: &ImfSet<T>) -> ModalityAssignment<T> {
    let n = set.residual.len();
    let imf = |k: usize| set.imfs.get(k - 1).cloned();
    let emg = imf(1).unwrap_or_else(|| vec![T::zero(); n]);
    let (eeg, degenerate_eeg) = match imf(3) {
        Some(v) => (v, false),
        None => (vec![T::zero(); n], true),
    };
    let mut eog = vec![T::zero(); n];
    for k in 4..=6 {
        if let Some(v) = set.imfs.get(k - 1) {
            for (o, x) in eog.iter_mut().zip(v) {
                *o = *o + *x;
            }
        }
    }
    ModalityAssignment {
        emg,
        eeg,
        eog,
        partial_eog: set.imfs.len() < 6,
        degenerate_eeg,
    }
}

/// Everything the assignment leaves out: IMF 2, IMFs beyond 6, and the residual.
pub fn unassigned<T: Real>(set: &ImfSet<T>) -> Vec<T> {
    let mut out = set.residual.clone();
    for (k, imf) in set.imfs.iter().enumerate() {
        if k == 1 || k >= 6 {
            for (o, v) in out.iter_mut().zip(imf) {
                *o = *o + *v;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set_with(count: usize, n: usize) -> ImfSet<f64> {
        ImfSet {
            imfs: (0..count).map(|k| vec![(k + 1) as f64; n]).collect(),
            residual: vec![0.5; n],
        }
    }

    #[test]
    fn ramp_has_no_imfs() {
        let x: Vec<f64> = (0..500).map(|i| 0.01 * i as f64).collect();
        let set = emd_decompose(&x, &EmdConfig::default()).unwrap();
        assert!(set.is_empty());
        assert_eq!(set.residual, x);
    }

    #[test]
    fn zero_input() {
        let set = emd_decompose(&vec![0.0f64; 300], &EmdConfig::default()).unwrap();
        assert!(set.is_empty());
        assert!(set.residual.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn six_imfs_follow_the_fixed_map() {
        let set = set_with(6, 4);
        let a = assign_modalities(&set);
        assert_eq!(a.emg, vec![1.0; 4]);
        assert_eq!(a.eeg, vec![3.0; 4]);
        assert_eq!(a.eog, vec![4.0 + 5.0 + 6.0; 4]);
        assert!(!a.partial_eog && !a.degenerate_eeg);
    }

    #[test]
    fn four_imfs_partial_eog() {
        let a = assign_modalities(&set_with(4, 3));
        assert_eq!(a.eog, vec![4.0; 3]);
        assert!(a.partial_eog);
        assert!(!a.degenerate_eeg);
    }

    #[test]
    fn two_imfs_degenerate_eeg() {
        let a = assign_modalities(&set_with(2, 3));
        assert_eq!(a.eeg, vec![0.0; 3]);
        assert!(a.degenerate_eeg);
    }

    #[test]
    fn assignment_never_drops_energy() {
        for count in 0..9 {
            let set = set_with(count, 5);
            let a = assign_modalities(&set);
            let rest = unassigned(&set);
            let total = set.reconstruct();
            for i in 0..5 {
                assert_eq!(a.emg[i] * (count >= 1) as u8 as f64 + a.eeg[i] + a.eog[i] + rest[i], total[i]);
            }
        }
    }

    #[test]
    fn spline_reproduces_cubic() {
        // a natural spline is exact for a straight line
        let t = [0.0, 3.0, 7.0, 12.0];
        let y: Vec<f64> = t.iter().map(|v| 2.0 * v - 1.0).collect();
        let s = natural_spline(&t, &y, 13);
        for (i, v) in s.iter().enumerate() {
            assert!((v - (2.0 * i as f64 - 1.0)).abs() < 1e-12);
        }
    }
}
