//! One-dimensional convolutional network over raw multichannel windows.
//!
//! Three conv blocks (conv k=3 p=1, ReLU, max-pool 2) feed a stack of dense
//! layers with ReLU and dropout, then a softmax over the two classes. Every
//! parameter tensor lives in one flat list so the optimizer, the gradient
//! check and the model file can treat them uniformly.

mod adam;
mod loss;
mod train;

pub use adam::{Adam, AdamConfig};
pub use loss::{alpha_from_counts, focal_loss, FocalConfig};
pub use train::{cnn_train, evaluate_loss, TrainConfig, TrainReport};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::labels::{from_index, Label};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnnConfig {
    pub in_channels: usize,
    pub in_len: usize,
    pub filters: Vec<usize>,
    pub kernel: usize,
    pub padding: usize,
    pub pool: usize,
    pub hidden: Vec<usize>,
    pub n_classes: usize,
    pub dropout: f64,
    /// Dropout follows this many leading hidden layers.
    pub dropout_layers: usize,
    pub init_seed: u64,
}

impl Default for CnnConfig {
    fn default() -> Self {
        CnnConfig {
            in_channels: 6,
            in_len: 2500,
            filters: vec![32, 64, 128],
            kernel: 3,
            padding: 1,
            pool: 2,
            hidden: vec![128, 128, 64],
            n_classes: 2,
            dropout: 0.5,
            dropout_layers: 2,
            init_seed: 0,
        }
    }
}

impl CnnConfig {
    /// Sequence length entering each conv block, then the length after the last pool.
    pub fn layer_lengths(&self) -> Vec<usize> {
        let mut out = vec![self.in_len];
        let mut l = self.in_len;
        for _ in &self.filters {
            let conv = (l + 2 * self.padding + 1).saturating_sub(self.kernel);
            l = conv / self.pool;
            out.push(l);
        }
        out
    }

    pub fn flat_len(&self) -> usize {
        self.filters.last().copied().unwrap_or(self.in_channels) * self.layer_lengths().last().copied().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.kernel == 0 || self.pool == 0 || self.n_classes < 2 {
            return Err(ModelError::param("cnn needs channels, kernel and pool >= 1 and two classes"));
        }
        if self.filters.contains(&0) || self.hidden.contains(&0) {
            return Err(ModelError::param("cnn layer widths must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(ModelError::param(format!("dropout must lie in [0, 1) (got {})", self.dropout)));
        }
        if let Some(pos) = self.layer_lengths().iter().position(|&l| l == 0) {
            return Err(ModelError::param(format!("input of {} samples vanishes after block {pos}", self.in_len)));
        }
        Ok(())
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.in_len
    }
}

/// A named parameter tensor stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    fn zeros(name: String, shape: Vec<usize>) -> Tensor {
        let n = shape.iter().product();
        Tensor {
            name,
            shape,
            data: vec![0.0; n],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cnn1d {
    pub cfg: CnnConfig,
    /// conv weights/biases per block, then dense weights/biases per layer
    /// (hidden layers followed by the output layer).
    pub params: Vec<Tensor>,
}

/// Forward or training pass; training draws dropout masks from the rng.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

/// Intermediate values kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    conv_in: Vec<Vec<f64>>,
    conv_pre: Vec<Vec<f64>>,
    pool_idx: Vec<Vec<usize>>,
    dense_in: Vec<Vec<f64>>,
    dense_pre: Vec<Vec<f64>>,
    masks: Vec<Option<Vec<f64>>>,
    pub probs: Vec<f64>,
}

impl Cnn1d {
    pub fn new(cfg: CnnConfig) -> Result<Cnn1d> {
        cfg.validate()?;
        let mut params = Vec::new();
        let mut c_in = cfg.in_channels;
        for (b, &f) in cfg.filters.iter().enumerate() {
            params.push(Tensor::zeros(format!("conv{b}.weight"), vec![f, c_in, cfg.kernel]));
            params.push(Tensor::zeros(format!("conv{b}.bias"), vec![f]));
            c_in = f;
        }
        let mut d_in = cfg.flat_len();
        let widths: Vec<usize> = cfg.hidden.iter().copied().chain([cfg.n_classes]).collect();
        for (l, &w) in widths.iter().enumerate() {
            params.push(Tensor::zeros(format!("dense{l}.weight"), vec![w, d_in]));
            params.push(Tensor::zeros(format!("dense{l}.bias"), vec![w]));
            d_in = w;
        }
        let mut rng = earpipe_core::rng::stream(cfg.init_seed, 0xc0);
        for t in params.iter_mut().filter(|t| t.shape.len() > 1) {
            let fan_in: usize = t.shape[1..].iter().product();
            let bound = (6.0 / fan_in as f64).sqrt();
            for v in &mut t.data {
                *v = rng.random_range(-bound..bound);
            }
        }
        Ok(Cnn1d { cfg, params })
    }

    /// Rebuilds a network from stored tensors, checking every shape.
    pub fn from_params(cfg: CnnConfig, params: Vec<Tensor>) -> Result<Cnn1d> {
        let template = Cnn1d::new(cfg.clone())?;
        if template.params.len() != params.len() {
            return Err(ModelError::param(format!(
                "expected {} tensors, got {}",
                template.params.len(),
                params.len()
            )));
        }
        for (a, b) in template.params.iter().zip(&params) {
            if a.shape != b.shape || b.data.len() != a.data.len() {
                return Err(ModelError::param(format!("tensor {} has shape {:?}, expected {:?}", b.name, b.shape, a.shape)));
            }
        }
        Ok(Cnn1d { cfg, params })
    }

    pub fn n_params(&self) -> usize {
        self.params.iter().map(|t| t.data.len()).sum()
    }

    fn conv(&self, b: usize) -> (&Tensor, &Tensor) {
        (&self.params[2 * b], &self.params[2 * b + 1])
    }

    fn dense(&self, l: usize) -> (&Tensor, &Tensor) {
        let o = 2 * self.cfg.filters.len();
        (&self.params[o + 2 * l], &self.params[o + 2 * l + 1])
    }

    pub fn forward(&self, x: &[f64], mode: Mode<'_>) -> Result<Cache> {
        if x.len() != self.cfg.input_len() {
            return Err(ModelError::Dimension {
                expected: self.cfg.input_len(),
                got: x.len(),
            });
        }
        let cfg = &self.cfg;
        let mut rng = match mode {
            Mode::Eval => None,
            Mode::Train(r) => Some(r),
        };
        let lens = cfg.layer_lengths();
        let mut cache = Cache {
            conv_in: Vec::new(),
            conv_pre: Vec::new(),
            pool_idx: Vec::new(),
            dense_in: Vec::new(),
            dense_pre: Vec::new(),
            masks: Vec::new(),
            probs: Vec::new(),
        };
        let mut h = x.to_vec();
        let mut c_in = cfg.in_channels;
        for (b, &c_out) in cfg.filters.iter().enumerate() {
            let l_in = lens[b];
            let l_conv = l_in + 2 * cfg.padding + 1 - cfg.kernel;
            let (w, bias) = self.conv(b);
            let pre = conv_forward(&h, c_in, l_in, &w.data, &bias.data, c_out, cfg.kernel, cfg.padding);
            let l_out = lens[b + 1];
            let mut pooled = vec![0.0; c_out * l_out];
            let mut idx = vec![0usize; c_out * l_out];
            for o in 0..c_out {
                for t in 0..l_out {
                    let base = o * l_conv + t * cfg.pool;
                    let mut best = base;
                    for p in 1..cfg.pool {
                        if pre[base + p] > pre[best] {
                            best = base + p;
                        }
                    }
                    pooled[o * l_out + t] = pre[best].max(0.0);
                    idx[o * l_out + t] = best;
                }
            }
            cache.conv_in.push(std::mem::replace(&mut h, pooled));
            cache.conv_pre.push(pre);
            cache.pool_idx.push(idx);
            c_in = c_out;
        }
        let n_dense = cfg.hidden.len() + 1;
        for l in 0..n_dense {
            let (w, bias) = self.dense(l);
            let out = w.shape[0];
            let d_in = w.shape[1];
            let mut z = bias.data.clone();
            for (r, zr) in z.iter_mut().enumerate() {
                *zr += dot(&w.data[r * d_in..(r + 1) * d_in], &h);
            }
            let last = l + 1 == n_dense;
            let mut a: Vec<f64> = if last { z.clone() } else { z.iter().map(|v| v.max(0.0)).collect() };
            let mut mask = None;
            if !last && l < cfg.dropout_layers && cfg.dropout > 0.0 {
                if let Some(r) = rng.as_deref_mut() {
                    let keep = 1.0 / (1.0 - cfg.dropout);
                    let m: Vec<f64> = (0..out)
                        .map(|_| if r.random::<f64>() < cfg.dropout { 0.0 } else { keep })
                        .collect();
                    for (v, k) in a.iter_mut().zip(&m) {
                        *v *= k;
                    }
                    mask = Some(m);
                }
            }
            cache.dense_in.push(std::mem::replace(&mut h, a));
            cache.dense_pre.push(z);
            cache.masks.push(mask);
        }
        cache.probs = softmax(&h);
        Ok(cache)
    }

    pub fn predict_proba(&self, x: &[f64]) -> Result<Vec<f64>> {
        Ok(self.forward(x, Mode::Eval)?.probs)
    }

    pub fn predict(&self, x: &[f64]) -> Result<Label> {
        let p = self.predict_proba(x)?;
        Ok(from_index(if p[1] > p[0] { 1 } else { 0 }))
    }

    /// Gradients of the loss with respect to every parameter tensor, given
    /// the gradient with respect to the logits.
    pub fn backward(&self, cache: &Cache, dlogits: &[f64]) -> Vec<Vec<f64>> {
        let cfg = &self.cfg;
        let mut grads: Vec<Vec<f64>> = self.params.iter().map(|t| vec![0.0; t.data.len()]).collect();
        let n_conv = cfg.filters.len();
        let n_dense = cfg.hidden.len() + 1;
        let mut g = dlogits.to_vec();
        for l in (0..n_dense).rev() {
            if l + 1 < n_dense {
                if let Some(m) = &cache.masks[l] {
                    for (v, k) in g.iter_mut().zip(m) {
                        *v *= k;
                    }
                }
                for (v, z) in g.iter_mut().zip(&cache.dense_pre[l]) {
                    if *z <= 0.0 {
                        *v = 0.0;
                    }
                }
            }
            let (w, _) = self.dense(l);
            let d_in = w.shape[1];
            let input = &cache.dense_in[l];
            let wi = 2 * n_conv + 2 * l;
            let mut gin = vec![0.0; d_in];
            for (r, &gr) in g.iter().enumerate() {
                if gr == 0.0 {
                    continue;
                }
                let row = &w.data[r * d_in..(r + 1) * d_in];
                let grow = &mut grads[wi][r * d_in..(r + 1) * d_in];
                for ((gw, x), (gi, wv)) in grow.iter_mut().zip(input).zip(gin.iter_mut().zip(row)) {
                    *gw += gr * x;
                    *gi += gr * wv;
                }
                grads[wi + 1][r] += gr;
            }
            g = gin;
        }
        let lens = cfg.layer_lengths();
        for b in (0..n_conv).rev() {
            let c_out = cfg.filters[b];
            let c_in = if b == 0 { cfg.in_channels } else { cfg.filters[b - 1] };
            let l_in = lens[b];
            let l_conv = l_in + 2 * cfg.padding + 1 - cfg.kernel;
            let pre = &cache.conv_pre[b];
            let mut dpre = vec![0.0; c_out * l_conv];
            for (j, &src) in cache.pool_idx[b].iter().enumerate() {
                if pre[src] > 0.0 {
                    dpre[src] += g[j];
                }
            }
            let (w, _) = self.conv(b);
            let (gw, rest) = grads.split_at_mut(2 * b + 1);
            g = conv_backward(
                &cache.conv_in[b],
                c_in,
                l_in,
                &w.data,
                &dpre,
                c_out,
                cfg.kernel,
                cfg.padding,
                &mut gw[2 * b],
                &mut rest[0],
                b > 0,
            );
        }
        grads
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

/// Valid range of output positions `t` for kernel tap `k`, so that the input
/// index `t + k - pad` lies inside `[0, l_in)`.
fn tap_range(k: usize, pad: usize, l_in: usize, l_out: usize) -> (usize, usize) {
    let lo = pad.saturating_sub(k);
    let hi = (l_in + pad).saturating_sub(k).min(l_out);
    (lo, hi.max(lo))
}

#[allow(clippy::too_many_arguments)]
fn conv_forward(
    x: &[f64],
    c_in: usize,
    l_in: usize,
    w: &[f64],
    bias: &[f64],
    c_out: usize,
    kernel: usize,
    pad: usize,
) -> Vec<f64> {
    let l_out = l_in + 2 * pad + 1 - kernel;
    let mut y = vec![0.0; c_out * l_out];
    for o in 0..c_out {
        let yo = &mut y[o * l_out..(o + 1) * l_out];
        yo.fill(bias[o]);
        for i in 0..c_in {
            let xi = &x[i * l_in..(i + 1) * l_in];
            for k in 0..kernel {
                let wv = w[(o * c_in + i) * kernel + k];
                let (lo, hi) = tap_range(k, pad, l_in, l_out);
                let src = &xi[lo + k - pad..hi + k - pad];
                for (yv, xv) in yo[lo..hi].iter_mut().zip(src) {
                    *yv += wv * xv;
                }
            }
        }
    }
    y
}

/// Accumulates weight and bias gradients and returns the input gradient
/// (empty when `need_input` is false).
#[allow(clippy::too_many_arguments)]
fn conv_backward(
    x: &[f64],
    c_in: usize,
    l_in: usize,
    w: &[f64],
    dy: &[f64],
    c_out: usize,
    kernel: usize,
    pad: usize,
    gw: &mut [f64],
    gb: &mut [f64],
    need_input: bool,
) -> Vec<f64> {
    let l_out = l_in + 2 * pad + 1 - kernel;
    let mut dx = if need_input { vec![0.0; c_in * l_in] } else { Vec::new() };
    for o in 0..c_out {
        let dyo = &dy[o * l_out..(o + 1) * l_out];
        gb[o] += dyo.iter().sum::<f64>();
        for i in 0..c_in {
            let xi = &x[i * l_in..(i + 1) * l_in];
            for k in 0..kernel {
                let (lo, hi) = tap_range(k, pad, l_in, l_out);
                let idx = (o * c_in + i) * kernel + k;
                gw[idx] += dot(&dyo[lo..hi], &xi[lo + k - pad..hi + k - pad]);
                if need_input {
                    let wv = w[idx];
                    let dxi = &mut dx[i * l_in + lo + k - pad..i * l_in + hi + k - pad];
                    for (d, g) in dxi.iter_mut().zip(&dyo[lo..hi]) {
                        *d += wv * g;
                    }
                }
            }
        }
    }
    dx
}
