use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{alpha_from_counts, focal_loss, Adam, AdamConfig, Cnn1d, CnnConfig, FocalConfig, Mode};
use crate::error::{check_dataset, ModelError, Result};
use crate::labels::{class_counts, require_both, to_index, Label};
use crate::metrics::Metrics;
use earpipe_core::rng::stream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    /// Share of all examples held out for the final test.
    pub test_fraction: f64,
    /// Share of the remaining examples used for validation.
    pub val_fraction: f64,
    pub rng_seed: u64,
    /// Fixed number of per-batch gradient partitions; results do not depend
    /// on the thread count.
    pub grad_chunks: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 350,
            batch_size: 32,
            adam: AdamConfig::default(),
            test_fraction: 0.2,
            val_fraction: 0.2,
            rng_seed: 0,
            grad_chunks: 8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 || self.grad_chunks == 0 {
            return Err(ModelError::param("batch size and gradient chunks must be positive"));
        }
        if !(0.0..1.0).contains(&self.test_fraction) || !(0.0..1.0).contains(&self.val_fraction) {
            return Err(ModelError::param("split fractions must lie in [0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean training-mode loss per epoch.
    pub train_loss: Vec<f64>,
    /// Eval-mode loss on the validation split per epoch (empty split: NaN-free, left empty).
    pub val_loss: Vec<f64>,
    pub test: Metrics,
    pub alpha: [f64; 2],
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
}

/// Mean eval-mode focal loss over `idx`.
pub fn evaluate_loss(net: &Cnn1d, x: &[Vec<f64>], labels: &[Label], idx: &[usize], focal: &FocalConfig, alpha: [f64; 2]) -> Result<f64> {
    if idx.is_empty() {
        return Ok(0.0);
    }
    let losses = idx
        .par_iter()
        .map(|&i| {
            let probs = net.predict_proba(&x[i])?;
            let t = to_index(labels[i]);
            Ok(focal_loss(&probs, t, alpha[t], focal.gamma)?.0)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(losses.iter().sum::<f64>() / idx.len() as f64)
}

pub fn cnn_train(
    x: &[Vec<f64>],
    labels: &[Label],
    model: &CnnConfig,
    cfg: &TrainConfig,
    focal: &FocalConfig,
) -> Result<(Cnn1d, TrainReport)> {
    cfg.validate()?;
    check_dataset(x, labels.len())?;
    require_both(labels)?;
    let mut net = Cnn1d::new(model.clone())?;
    if x[0].len() != model.input_len() {
        return Err(ModelError::Dimension {
            expected: model.input_len(),
            got: x[0].len(),
        });
    }

    let mut order: Vec<usize> = (0..x.len()).collect();
    order.shuffle(&mut stream(cfg.rng_seed, 1));
    let n_test = (cfg.test_fraction * x.len() as f64).round() as usize;
    let (test_idx, rest) = order.split_at(n_test);
    let n_val = (cfg.val_fraction * rest.len() as f64).round() as usize;
    let (val_idx, train_idx) = rest.split_at(n_val);
    let train_labels: Vec<Label> = train_idx.iter().map(|&i| labels[i]).collect();
    let counts = class_counts(&train_labels);
    let alpha = match focal.alpha {
        Some(a) => a,
        None => alpha_from_counts(counts)?,
    };
    if counts.contains(&0) {
        return Err(ModelError::SingleClass(format!("training split has class counts {counts:?}")));
    }

    let mut opt = Adam::new(cfg.adam.clone(), &net.params);
    let mut shuffler = stream(cfg.rng_seed, 2);
    let mut train_idx = train_idx.to_vec();
    let mut report = TrainReport {
        train_loss: Vec::with_capacity(cfg.epochs),
        val_loss: Vec::with_capacity(cfg.epochs),
        test: Metrics::from_predictions(&[], &[]),
        alpha,
        n_train: train_idx.len(),
        n_val: val_idx.len(),
        n_test: test_idx.len(),
    };
    for epoch in 0..cfg.epochs {
        train_idx.shuffle(&mut shuffler);
        let mut epoch_loss = 0.0;
        for (bi, batch) in train_idx.chunks(cfg.batch_size).enumerate() {
            let chunk = batch.len().div_ceil(cfg.grad_chunks);
            let parts = batch
                .par_chunks(chunk)
                .enumerate()
                .map(|(ci, part)| {
                    let mut grads: Vec<Vec<f64>> = net.params.iter().map(|t| vec![0.0; t.data.len()]).collect();
                    let mut loss = 0.0;
                    for (k, &i) in part.iter().enumerate() {
                        let id = ((epoch as u64) << 40) | ((bi as u64) << 16) | (ci * chunk + k) as u64;
                        let mut rng = stream(cfg.rng_seed ^ 0xd50f, id);
                        let cache = net.forward(&x[i], Mode::Train(&mut rng))?;
                        let t = to_index(labels[i]);
                        let (l, dlogits) = focal_loss(&cache.probs, t, alpha[t], focal.gamma)?;
                        loss += l;
                        for (acc, g) in grads.iter_mut().zip(net.backward(&cache, &dlogits)) {
                            for (a, v) in acc.iter_mut().zip(g) {
                                *a += v;
                            }
                        }
                    }
                    Ok((loss, grads))
                })
                .collect::<Result<Vec<_>>>()?;
            let scale = 1.0 / batch.len() as f64;
            let mut total: Vec<Vec<f64>> = net.params.iter().map(|t| vec![0.0; t.data.len()]).collect();
            for (loss, grads) in parts {
                epoch_loss += loss;
                for (acc, g) in total.iter_mut().zip(grads) {
                    for (a, v) in acc.iter_mut().zip(g) {
                        *a += v * scale;
                    }
                }
            }
            opt.step(&mut net.params, &total);
        }
        report.train_loss.push(epoch_loss / train_idx.len() as f64);
        if !val_idx.is_empty() {
            report.val_loss.push(evaluate_loss(&net, x, labels, val_idx, focal, alpha)?);
        }
        log::debug!("epoch {epoch}: train loss {:.6}", report.train_loss[epoch]);
    }
    let truth: Vec<Label> = test_idx.iter().map(|&i| labels[i]).collect();
    let predicted = test_idx
        .par_iter()
        .map(|&i| net.predict(&x[i]))
        .collect::<Result<Vec<Label>>>()?;
    report.test = Metrics::from_predictions(&truth, &predicted);
    Ok((net, report))
}
