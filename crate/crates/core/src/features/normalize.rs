use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    #[default]
    ZScore,
    MinMax,
}

/// Per-feature affine map `(x - center) / scale` fitted on one training set.
///
/// For z-scoring `center` is the mean and `scale` the population standard
/// deviation; for min-max they are the minimum and the range. Features with
/// zero spread are flagged in `passthrough` and left unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalizationParams {
    pub mode: NormalizationMode,
    /// Identifier of the population the parameters were fitted on.
    pub population: String,
    pub n_samples: usize,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
    pub passthrough: Vec<bool>,
}

impl NormalizationParams {
    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// Hash of every fitted value, bit-exact.
    pub fn fingerprint(&self) -> u64 {
        let mut h = DefaultHasher::new();
        self.mode.hash(&mut h);
        self.n_samples.hash(&mut h);
        for (c, s) in self.center.iter().zip(&self.scale) {
            c.to_bits().hash(&mut h);
            s.to_bits().hash(&mut h);
        }
        self.passthrough.hash(&mut h);
        h.finish()
    }

    pub fn apply_row(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.dim() {
            return Err(CoreError::ShapeMismatch(format!(
                "row has {} features, normalizer has {}",
                row.len(),
                self.dim()
            )));
        }
        Ok(row
            .iter()
            .enumerate()
            .map(|(j, &x)| {
                if self.passthrough[j] {
                    x
                } else {
                    (x - self.center[j]) / self.scale[j]
                }
            })
            .collect())
    }
}

pub fn fit_normalizer(rows: &[Vec<f64>], mode: NormalizationMode, population: &str) -> Result<NormalizationParams> {
    let first = rows
        .first()
        .ok_or_else(|| CoreError::Degenerate("cannot fit a normalizer on an empty training set".into()))?;
    let d = first.len();
    if let Some(bad) = rows.iter().position(|r| r.len() != d) {
        return Err(CoreError::ShapeMismatch(format!(
            "row {bad} has {} features, row 0 has {d}",
            rows[bad].len()
        )));
    }
    let n = rows.len() as f64;
    let mut center = vec![0.0; d];
    let mut scale = vec![0.0; d];
    let mut passthrough = vec![false; d];
    for j in 0..d {
        let col = rows.iter().map(|r| r[j]);
        let (c, s) = match mode {
            NormalizationMode::ZScore => {
                let mean = col.clone().sum::<f64>() / n;
                let var = col.map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                (mean, var.sqrt())
            }
            NormalizationMode::MinMax => {
                let lo = col.clone().fold(f64::INFINITY, f64::min);
                let hi = col.fold(f64::NEG_INFINITY, f64::max);
                (lo, hi - lo)
            }
        };
        center[j] = c;
        scale[j] = s;
        passthrough[j] = !(s > 1e-12 * c.abs()) || !s.is_finite();
    }
    Ok(NormalizationParams {
        mode,
        population: population.to_string(),
        n_samples: rows.len(),
        center,
        scale,
        passthrough,
    })
}

pub fn apply_normalizer(params: &NormalizationParams, rows: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    rows.iter().map(|r| params.apply_row(r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_arithmetic() {
        let p = fit_normalizer(&[vec![0.0], vec![2.0]], NormalizationMode::ZScore, "train").unwrap();
        assert_eq!(apply_normalizer(&p, &[vec![1.0]]).unwrap(), vec![vec![0.0]]);
        let m = fit_normalizer(&[vec![0.0], vec![2.0]], NormalizationMode::MinMax, "train").unwrap();
        assert_eq!(apply_normalizer(&m, &[vec![1.0]]).unwrap(), vec![vec![0.5]]);
    }

    #[test]
    fn training_set_is_standardized() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![i as f64 * 0.3 - 2.0, (i * i) as f64, 5.0]).collect();
        let p = fit_normalizer(&rows, NormalizationMode::ZScore, "t").unwrap();
        let z = apply_normalizer(&p, &rows).unwrap();
        for j in 0..2 {
            let mean = z.iter().map(|r| r[j]).sum::<f64>() / 40.0;
            let var = z.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / 40.0;
            assert!(mean.abs() < 1e-9 && (var.sqrt() - 1.0).abs() < 1e-9);
        }
        assert!(p.passthrough[2]);
        assert!(z.iter().all(|r| r[2] == 5.0));
    }

    #[test]
    fn empty_and_ragged_rejected() {
        assert!(fit_normalizer(&[], NormalizationMode::ZScore, "t").is_err());
        assert!(fit_normalizer(&[vec![1.0], vec![1.0, 2.0]], NormalizationMode::ZScore, "t").is_err());
    }
}
