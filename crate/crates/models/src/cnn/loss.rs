use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};

/// Floor applied to the target probability before taking its logarithm.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FocalConfig {
    pub gamma: f64,
    /// Per-class weights; derived from training class counts when absent.
    pub alpha: Option<[f64; 2]>,
}

impl Default for FocalConfig {
    fn default() -> Self {
        FocalConfig { gamma: 2.0, alpha: None }
    }
}

/// Weights inversely proportional to class frequency, summing to one.
pub fn alpha_from_counts(counts: [usize; 2]) -> Result<[f64; 2]> {
    if counts.contains(&0) {
        return Err(ModelError::SingleClass(format!("class counts {counts:?}")));
    }
    let inv = [1.0 / counts[0] as f64, 1.0 / counts[1] as f64];
    let s = inv[0] + inv[1];
    Ok([inv[0] / s, inv[1] / s])
}

/// `alpha * (1 - p_t)^gamma * -ln(p_t)` and its gradient with respect to the
/// logits that produced `probs` through a softmax.
pub fn focal_loss(probs: &[f64], target: usize, alpha: f64, gamma: f64) -> Result<(f64, Vec<f64>)> {
    if target >= probs.len() {
        return Err(ModelError::param(format!("target {target} outside {} classes", probs.len())));
    }
    let pt = probs[target].max(PROB_FLOOR);
    if !(pt > 0.0) {
        return Err(ModelError::param(format!("target probability {} is not positive", probs[target])));
    }
    let q = 1.0 - pt;
    let log_pt = pt.ln();
    let loss = -alpha * q.powf(gamma) * log_pt;
    // dL/dp_t, then chain through dp_t/dz_j = p_t (delta_tj - p_j)
    let focus = if gamma == 0.0 { 0.0 } else { gamma * q.powf(gamma - 1.0) * log_pt };
    let dl_dpt = alpha * (focus - q.powf(gamma) / pt);
    let grad = probs
        .iter()
        .enumerate()
        .map(|(j, &pj)| dl_dpt * pt * (if j == target { 1.0 } else { 0.0 } - pj))
        .collect();
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        let ln2 = 2f64.ln();
        assert!((focal_loss(&[0.5, 0.5], 0, 1.0, 0.0).unwrap().0 - ln2).abs() < 1e-12);
        assert!((focal_loss(&[0.5, 0.5], 1, 1.0, 2.0).unwrap().0 - 0.25 * ln2).abs() < 1e-12);
        assert_eq!(focal_loss(&[0.0, 1.0], 1, 0.7, 2.0).unwrap().0, 0.0);
    }

    #[test]
    fn class_weights() {
        let a = alpha_from_counts([10, 30]).unwrap();
        assert!((a[0] - 0.75).abs() < 1e-12 && (a[1] - 0.25).abs() < 1e-12);
        assert!(alpha_from_counts([0, 3]).is_err());
    }
}
