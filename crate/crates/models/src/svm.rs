//! Soft-margin SVM with an RBF kernel, trained by sequential minimal
//! optimization on the dual with maximal-violating-pair working sets.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_dataset, ModelError, Result};
use crate::labels::{from_sign, require_both, to_sign, Label};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmConfig {
    pub gamma: f64,
    pub c: f64,
    /// Stop once the maximal KKT violation falls below this.
    pub tol: f64,
    /// Iteration cap; 0 means `max(10^7, 100 n)`.
    pub max_iter: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            gamma: 0.5,
            c: 20.0,
            tol: 1e-3,
            max_iter: 0,
        }
    }
}

impl SvmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.c > 0.0 && self.tol > 0.0) {
            return Err(ModelError::param(format!(
                "svm needs gamma, C and tol > 0 (got {}, {}, {})",
                self.gamma, self.c, self.tol
            )));
        }
        Ok(())
    }
}

pub fn rbf(a: &[f64], b: &[f64], gamma: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-gamma * d2).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub gamma: f64,
    pub c: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// `alpha_i * y_i` for each support vector.
    pub dual_coef: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SvmModel {
    pub fn dim(&self) -> usize {
        self.support_vectors.first().map_or(0, Vec::len)
    }

    /// `sum_i alpha_i y_i K(x_i, x) + b`.
    pub fn decision(&self, x: &[f64]) -> Result<f64> {
        if !self.support_vectors.is_empty() && x.len() != self.dim() {
            return Err(ModelError::Dimension {
                expected: self.dim(),
                got: x.len(),
            });
        }
        let s: f64 = self
            .support_vectors
            .iter()
            .zip(&self.dual_coef)
            .map(|(sv, a)| a * rbf(sv, x, self.gamma))
            .sum();
        Ok(s + self.bias)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        self.decision(x).map(from_sign)
    }
}

/// Full dual solution, kept for diagnostics and KKT checks.
#[derive(Debug, Clone, PartialEq)]
pub struct SvmSolution {
    pub model: SvmModel,
    /// Dual variables for every training row, in input order.
    pub alpha: Vec<f64>,
}

pub fn svm_train(x: &[Vec<f64>], labels: &[Label], cfg: &SvmConfig) -> Result<SvmModel> {
    svm_solve(x, labels, cfg).map(|s| s.model)
}

pub fn svm_solve(x: &[Vec<f64>], labels: &[Label], cfg: &SvmConfig) -> Result<SvmSolution> {
    cfg.validate()?;
    check_dataset(x, labels.len())?;
    require_both(labels)?;
    let n = x.len();
    let y: Vec<f64> = labels.iter().map(|&l| to_sign(l)).collect();
    let k: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).map(|j| rbf(&x[i], &x[j], cfg.gamma)).collect())
        .collect();
    let q = |i: usize, j: usize| y[i] * y[j] * k[i][j];
    let c = cfg.c;
    let max_iter = if cfg.max_iter == 0 { (100 * n).max(10_000_000) } else { cfg.max_iter };

    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // i maximizes -y G over I_up, j maximizes y G over I_low
        let (mut gmax, mut gmax2) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        let (mut i, mut j) = (usize::MAX, usize::MAX);
        for t in 0..n {
            let up = if y[t] > 0.0 { alpha[t] < c } else { alpha[t] > 0.0 };
            let low = if y[t] > 0.0 { alpha[t] > 0.0 } else { alpha[t] < c };
            if up && -y[t] * grad[t] > gmax {
                gmax = -y[t] * grad[t];
                i = t;
            }
            if low && y[t] * grad[t] > gmax2 {
                gmax2 = y[t] * grad[t];
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax + gmax2 < cfg.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = (k[i][i] + k[j][j] + 2.0 * q(i, j)).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (k[i][i] + k[j][j] - 2.0 * q(i, j)).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
    }
    if !converged {
        log::warn!("smo stopped after {iterations} iterations without meeting tol {}", cfg.tol);
    }

    let (mut ub, mut lb, mut sum_free, mut n_free) = (f64::INFINITY, f64::NEG_INFINITY, 0.0, 0usize);
    for t in 0..n {
        let yg = y[t] * grad[t];
        if alpha[t] >= c {
            if y[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if y[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { (ub + lb) / 2.0 };

    let sv: Vec<usize> = (0..n).filter(|&t| alpha[t] > 0.0).collect();
    let model = SvmModel {
        gamma: cfg.gamma,
        c,
        support_vectors: sv.iter().map(|&t| x[t].clone()).collect(),
        dual_coef: sv.iter().map(|&t| alpha[t] * y[t]).collect(),
        bias: -rho,
        iterations,
        converged,
    };
    Ok(SvmSolution { model, alpha })
}
