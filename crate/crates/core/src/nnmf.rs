//! Supervised nonnegative matrix factorization of power spectrograms.
//!
//! Templates `W` are learned per modality from clean sources with the full
//! multiplicative updates; separation then keeps `W` fixed, solves for the
//! activations `H`, and splits the mixture with soft masks.

use std::fs;
use std::io::Write;
use std::ops::Range;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::rng::stream;
use crate::scalar::Real;
use crate::signals::Modality;
use crate::stft::{istft, stft, StftConfig};

/// Member of the β-divergence family supported by the solver.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(try_from = "u8", into = "u8")]
pub enum Beta {
    #[default]
    ItakuraSaito,
    KullbackLeibler,
    Euclidean,
}

impl Beta {
    pub fn value(self) -> u8 {
        match self {
            Beta::ItakuraSaito => 0,
            Beta::KullbackLeibler => 1,
            Beta::Euclidean => 2,
        }
    }
}

impl TryFrom<u8> for Beta {
    type Error = CoreError;

    fn try_from(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Beta::ItakuraSaito),
            1 => Ok(Beta::KullbackLeibler),
            2 => Ok(Beta::Euclidean),
            other => Err(CoreError::param(format!("beta must be 0, 1 or 2 (got {other})"))),
        }
    }
}

impl From<Beta> for u8 {
    fn from(b: Beta) -> u8 {
        b.value()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NnmfConfig {
    pub rank_eeg: usize,
    pub rank_eog: usize,
    pub rank_emg: usize,
    pub beta: Beta,
    pub max_iter: usize,
    /// Relative divergence decrease below which iteration stops.
    pub tol: f64,
    /// Positivity floor applied after every update.
    pub eps: f64,
    pub rng_seed: u64,
}

impl Default for NnmfConfig {
    fn default() -> Self {
        NnmfConfig {
            rank_eeg: 10,
            rank_eog: 10,
            rank_emg: 10,
            beta: Beta::ItakuraSaito,
            max_iter: 200,
            tol: 1e-6,
            eps: 1e-12,
            rng_seed: 0,
        }
    }
}

impl NnmfConfig {
    pub fn rank(&self, m: Modality) -> usize {
        match m {
            Modality::Eeg => self.rank_eeg,
            Modality::Eog => self.rank_eog,
            Modality::Emg => self.rank_emg,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if Modality::ALL.iter().any(|&m| self.rank(m) == 0) {
            return Err(CoreError::param("nnmf ranks must be at least 1"));
        }
        if !(self.eps > 0.0) {
            return Err(CoreError::param(format!("nnmf eps must be positive (got {})", self.eps)));
        }
        if !(self.tol >= 0.0) {
            return Err(CoreError::param(format!("nnmf tol must be nonnegative (got {})", self.tol)));
        }
        Ok(())
    }
}

/// Elementwise β-divergence summed over all entries.
///
/// The Euclidean member is `0.5 * sum((x - y)^2)`, the β = 2 case of the
/// general family, so it scales quadratically under `x, y -> λx, λy`.
pub fn beta_divergence<T: Real>(x: &Array2<T>, y: &Array2<T>, beta: Beta) -> Result<T> {
    if x.dim() != y.dim() {
        return Err(CoreError::ShapeMismatch(format!("{:?} vs {:?}", x.dim(), y.dim())));
    }
    let half = T::lit(0.5);
    let mut acc = T::zero();
    for (&a, &b) in x.iter().zip(y.iter()) {
        if a < T::zero() || b < T::zero() {
            return Err(CoreError::param("beta divergence needs nonnegative inputs"));
        }
        let d = match beta {
            Beta::Euclidean => half * (a - b) * (a - b),
            Beta::KullbackLeibler => {
                if b <= T::zero() {
                    return Err(CoreError::param("kl divergence needs a strictly positive model"));
                }
                let log_term = if a > T::zero() { a * (a / b).ln() } else { T::zero() };
                log_term - a + b
            }
            Beta::ItakuraSaito => {
                if a <= T::zero() || b <= T::zero() {
                    return Err(CoreError::param("is divergence needs strictly positive inputs"));
                }
                let r = a / b;
                r - r.ln() - T::one()
            }
        };
        acc = acc + d;
    }
    Ok(acc)
}

fn floor<T: Real>(m: &mut Array2<T>, eps: T) {
    m.mapv_inplace(|v| if v > eps { v } else { eps });
}

/// Returns `(V * (WH)^(β-2), (WH)^(β-1))`.
fn weighted<T: Real>(v: &Array2<T>, wh: &Array2<T>, beta: Beta) -> (Array2<T>, Array2<T>) {
    match beta {
        Beta::ItakuraSaito => {
            let inv = wh.mapv(|x| T::one() / x);
            let num = v * &inv * &inv;
            (num, inv)
        }
        Beta::KullbackLeibler => (v / wh, wh.mapv(|_| T::one())),
        Beta::Euclidean => (v.clone(), wh.clone()),
    }
}

/// One multiplicative update of `H` with `W` held fixed.
pub fn update_h<T: Real>(v: &Array2<T>, w: &Array2<T>, h: &mut Array2<T>, beta: Beta, eps: T) {
    let wh = w.dot(&*h);
    let (a, b) = weighted(v, &wh, beta);
    let wt = w.t();
    let num = wt.dot(&a);
    let den = wt.dot(&b);
    h.zip_mut_with(&(num / den), |x, &r| *x = *x * r);
    floor(h, eps);
}

/// One multiplicative update of `W` with `H` held fixed.
pub fn update_w<T: Real>(v: &Array2<T>, w: &mut Array2<T>, h: &Array2<T>, beta: Beta, eps: T) {
    let wh = w.dot(h);
    let (a, b) = weighted(v, &wh, beta);
    let ht = h.t();
    let num = a.dot(&ht);
    let den = b.dot(&ht);
    w.zip_mut_with(&(num / den), |x, &r| *x = *x * r);
    floor(w, eps);
}

/// Result of an NNMF run; `divergence[0]` is the value at initialization and
/// `divergence[i]` the value after iteration `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factorization<T> {
    pub w: Array2<T>,
    pub h: Array2<T>,
    pub divergence: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

fn uniform_init<T: Real>(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<T> {
    // (0, 1]: 1 - [0, 1)
    Array2::from_shape_fn((rows, cols), |_| T::lit(1.0 - rng.random::<f64>()))
}

fn check_input<T: Real>(v: &Array2<T>) -> Result<()> {
    if v.is_empty() {
        return Err(CoreError::Degenerate("empty spectrogram".into()));
    }
    if v.iter().any(|x| !x.is_finite() || *x < T::zero()) {
        return Err(CoreError::param("nnmf input must be finite and nonnegative"));
    }
    Ok(())
}

fn run<T: Real>(
    v: &Array2<T>,
    mut w: Array2<T>,
    mut h: Array2<T>,
    cfg: &NnmfConfig,
    learn_w: bool,
) -> Result<Factorization<T>> {
    let eps = T::lit(cfg.eps);
    let mut v = v.clone();
    floor(&mut v, eps);
    let mut trace = vec![beta_divergence(&v, &w.dot(&h), cfg.beta)?];
    let mut converged = false;
    let mut iterations = 0;
    for _ in 0..cfg.max_iter {
        update_h(&v, &w, &mut h, cfg.beta, eps);
        if learn_w {
            update_w(&v, &mut w, &h, cfg.beta, eps);
        }
        iterations += 1;
        let d = beta_divergence(&v, &w.dot(&h), cfg.beta)?;
        let prev = *trace.last().expect("trace seeded");
        trace.push(d);
        if prev <= T::zero() || (prev - d) / prev < T::lit(cfg.tol) {
            converged = true;
            break;
        }
    }
    Ok(Factorization {
        w,
        h,
        divergence: trace,
        iterations,
        converged,
    })
}

/// Full factorization `V ≈ WH` with both factors learned.
pub fn factorize<T: Real>(v: &Array2<T>, rank: usize, cfg: &NnmfConfig, stream_id: u64) -> Result<Factorization<T>> {
    cfg.validate()?;
    check_input(v)?;
    if rank == 0 {
        return Err(CoreError::param("nnmf rank must be at least 1"));
    }
    let mut rng = stream(cfg.rng_seed, stream_id);
    let w = uniform_init(v.nrows(), rank, &mut rng);
    let h = uniform_init(rank, v.ncols(), &mut rng);
    run(v, w, h, cfg, true)
}

/// Solves for activations with the templates held fixed.
pub fn solve_activations<T: Real>(v: &Array2<T>, w: &Array2<T>, cfg: &NnmfConfig, stream_id: u64) -> Result<Factorization<T>> {
    cfg.validate()?;
    check_input(v)?;
    if w.nrows() != v.nrows() {
        return Err(CoreError::param(format!(
            "template has {} bins, spectrogram has {}",
            w.nrows(),
            v.nrows()
        )));
    }
    let mut rng = stream(cfg.rng_seed, stream_id);
    let h = uniform_init(w.ncols(), v.ncols(), &mut rng);
    run(v, w.clone(), h, cfg, false)
}

/// Contiguous column range of one modality inside a template matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemplateBlock {
    pub modality: Modality,
    pub start: usize,
    pub end: usize,
}

impl TemplateBlock {
    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }
}

/// Spectral templates for EEG, EOG and EMG with L1-normalized columns.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTemplate<T> {
    pub w: Array2<T>,
    pub blocks: Vec<TemplateBlock>,
    pub sample_rate: f64,
    pub stft: StftConfig,
    pub nnmf: NnmfConfig,
}

impl<T: Real> FrequencyTemplate<T> {
    pub fn bins(&self) -> usize {
        self.w.nrows()
    }

    pub fn columns(&self) -> usize {
        self.w.ncols()
    }

    pub fn block(&self, m: Modality) -> Option<Range<usize>> {
        self.blocks.iter().find(|b| b.modality == m).map(TemplateBlock::range)
    }

    pub fn column_modality(&self) -> Vec<Modality> {
        let mut out = Vec::with_capacity(self.columns());
        for b in &self.blocks {
            out.extend(std::iter::repeat_n(b.modality, b.end - b.start));
        }
        out
    }

    fn validate(&self) -> Result<()> {
        let mut next = 0;
        for b in &self.blocks {
            if b.start != next || b.end <= b.start {
                return Err(CoreError::param("template blocks must be contiguous and nonempty"));
            }
            next = b.end;
        }
        if next != self.columns() {
            return Err(CoreError::param(format!(
                "template blocks cover {next} columns, matrix has {}",
                self.columns()
            )));
        }
        if self.bins() != self.stft.bins() {
            return Err(CoreError::param(format!(
                "template has {} bins, stft config implies {}",
                self.bins(),
                self.stft.bins()
            )));
        }
        if self.w.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(CoreError::param("template entries must be finite and nonnegative"));
        }
        Ok(())
    }
}

/// Clean training signals per modality; each modality may hold several segments.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TemplateSources<T> {
    pub eeg: Vec<Vec<T>>,
    pub eog: Vec<Vec<T>>,
    pub emg: Vec<Vec<T>>,
}

impl<T> TemplateSources<T> {
    pub fn get(&self, m: Modality) -> &[Vec<T>] {
        match m {
            Modality::Eeg => &self.eeg,
            Modality::Eog => &self.eog,
            Modality::Emg => &self.emg,
        }
    }
}

/// Power spectrogram frames of all segments, concatenated along time.
fn stacked_power<T: Real>(segments: &[Vec<T>], sample_rate: f64, cfg: &StftConfig) -> Result<Array2<T>> {
    let mut blocks = Vec::new();
    for s in segments.iter().filter(|s| !s.is_empty()) {
        blocks.push(stft(s, sample_rate, cfg)?.power());
    }
    if blocks.is_empty() {
        return Err(CoreError::param("template source is empty"));
    }
    let views: Vec<_> = blocks.iter().map(|b| b.view()).collect();
    ndarray::concatenate(Axis(1), &views).map_err(|e| CoreError::ShapeMismatch(e.to_string()))
}

pub fn train_templates<T: Real>(
    sources: &TemplateSources<T>,
    sample_rate: f64,
    stft_cfg: &StftConfig,
    cfg: &NnmfConfig,
) -> Result<FrequencyTemplate<T>> {
    stft_cfg.validate()?;
    cfg.validate()?;
    let mut columns = Vec::new();
    let mut blocks = Vec::new();
    let mut start = 0;
    for (i, &m) in Modality::ALL.iter().enumerate() {
        let v = stacked_power(sources.get(m), sample_rate, stft_cfg)
            .map_err(|e| CoreError::param(format!("{} templates: {e}", m.name())))?;
        if v.iter().all(|&x| x <= T::zero()) {
            return Err(CoreError::Degenerate(format!("{} template source is all zero", m.name())));
        }
        let rank = cfg.rank(m);
        let fact = factorize(&v, rank, cfg, i as u64 + 1)?;
        log::debug!(
            "{} templates: {} iterations, divergence {} -> {}",
            m.name(),
            fact.iterations,
            fact.divergence[0],
            fact.divergence[fact.divergence.len() - 1]
        );
        let mut w = fact.w;
        for mut col in w.axis_iter_mut(Axis(1)) {
            let s = col.sum();
            col.mapv_inplace(|x| x / s);
        }
        columns.push(w);
        blocks.push(TemplateBlock {
            modality: m,
            start,
            end: start + rank,
        });
        start += rank;
    }
    let views: Vec<_> = columns.iter().map(|c| c.view()).collect();
    let w = ndarray::concatenate(Axis(1), &views).map_err(|e| CoreError::ShapeMismatch(e.to_string()))?;
    Ok(FrequencyTemplate {
        w,
        blocks,
        sample_rate,
        stft: *stft_cfg,
        nnmf: cfg.clone(),
    })
}

/// Per-modality reconstructions of one mixed channel.
#[derive(Debug, Clone, PartialEq)]
pub struct Separated<T> {
    pub eeg: Vec<T>,
    pub eog: Vec<T>,
    pub emg: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

impl<T> Separated<T> {
    pub fn get(&self, m: Modality) -> &[T] {
        match m {
            Modality::Eeg => &self.eeg,
            Modality::Eog => &self.eog,
            Modality::Emg => &self.emg,
        }
    }
}

/// Soft masks `(P_s + eps/3) / (sum P + eps)`; they sum to one elementwise.
pub fn soft_masks<T: Real>(powers: &[Array2<T>], eps: T) -> Vec<Array2<T>> {
    let Some(first) = powers.first() else {
        return Vec::new();
    };
    let mut total = Array2::from_elem(first.dim(), eps);
    for p in powers {
        total = total + p;
    }
    let share = eps / T::from_usize_lossy(powers.len());
    powers
        .iter()
        .map(|p| {
            let mut m = p.mapv(|x| x + share);
            m.zip_mut_with(&total, |a, &t| *a = *a / t);
            m
        })
        .collect()
}

pub fn separate<T: Real>(
    mixed: &[T],
    sample_rate: f64,
    template: &FrequencyTemplate<T>,
    stft_cfg: &StftConfig,
    cfg: &NnmfConfig,
) -> Result<Separated<T>> {
    template.validate()?;
    if stft_cfg.bins() != template.bins() {
        return Err(CoreError::param(format!(
            "template has {} bins, stft config gives {}",
            template.bins(),
            stft_cfg.bins()
        )));
    }
    if (template.sample_rate - sample_rate).abs() > 1e-9 * sample_rate {
        return Err(CoreError::param(format!(
            "template trained at {} Hz, signal is {} Hz",
            template.sample_rate, sample_rate
        )));
    }
    let spec = stft(mixed, sample_rate, stft_cfg)?;
    if spec.frames() == 0 {
        return Ok(Separated {
            eeg: Vec::new(),
            eog: Vec::new(),
            emg: Vec::new(),
            iterations: 0,
            converged: true,
        });
    }
    let fact = solve_activations(&spec.power(), &template.w, cfg, 0)?;
    let mut powers = Vec::with_capacity(3);
    for m in Modality::ALL {
        let r = template
            .block(m)
            .ok_or_else(|| CoreError::param(format!("template has no {} block", m.name())))?;
        let w = template.w.slice(ndarray::s![.., r.clone()]);
        let h = fact.h.slice(ndarray::s![r, ..]);
        powers.push(w.dot(&h));
    }
    let masks = soft_masks(&powers, T::lit(cfg.eps));
    let mut outs = Vec::with_capacity(3);
    for mask in &masks {
        outs.push(istft(&spec.masked(mask)?)?);
    }
    let emg = outs.pop().expect("three masks");
    let eog = outs.pop().expect("three masks");
    let eeg = outs.pop().expect("three masks");
    Ok(Separated {
        eeg,
        eog,
        emg,
        iterations: fact.iterations,
        converged: fact.converged,
    })
}

const TEMPLATE_FORMAT: &str = "earpipe-templates";

#[derive(Debug, Serialize, Deserialize)]
struct TemplateHeader {
    format: String,
    version: u32,
    sample_rate: f64,
    bins: usize,
    columns: usize,
    blocks: Vec<TemplateBlock>,
    stft: StftConfig,
    nnmf: NnmfConfig,
}

/// Writes a JSON header line followed by `W` as little-endian `f64`, column-major.
pub fn save_templates<T: Real>(template: &FrequencyTemplate<T>, path: &Path) -> Result<()> {
    template.validate()?;
    let header = TemplateHeader {
        format: TEMPLATE_FORMAT.into(),
        version: 1,
        sample_rate: template.sample_rate,
        bins: template.bins(),
        columns: template.columns(),
        blocks: template.blocks.clone(),
        stft: template.stft,
        nnmf: template.nnmf.clone(),
    };
    let mut bytes = serde_json::to_vec(&header)?;
    bytes.push(b'\n');
    for col in template.w.axis_iter(Axis(1)) {
        for v in col {
            bytes.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
    let mut f = fs::File::create(path)?;
    f.write_all(&bytes)?;
    Ok(())
}

pub fn load_templates<T: Real>(path: &Path) -> Result<FrequencyTemplate<T>> {
    let bytes = fs::read(path)?;
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| CoreError::parse("header", "missing header line terminator"))?;
    let header: TemplateHeader =
        serde_json::from_slice(&bytes[..nl]).map_err(|e| CoreError::parse("header", e.to_string()))?;
    if header.format != TEMPLATE_FORMAT || header.version != 1 {
        return Err(CoreError::parse(
            "header",
            format!("unsupported template format {} v{}", header.format, header.version),
        ));
    }
    let payload = &bytes[nl + 1..];
    let expected = header.bins * header.columns * 8;
    if payload.len() != expected {
        return Err(CoreError::parse(
            format!("byte {}", nl + 1 + payload.len().min(expected)),
            format!("payload has {} bytes, header implies {expected}", payload.len()),
        ));
    }
    let mut w = Array2::zeros((header.bins, header.columns));
    for (i, chunk) in payload.chunks_exact(8).enumerate() {
        let v = f64::from_le_bytes(chunk.try_into().expect("8-byte chunk"));
        w[[i % header.bins, i / header.bins]] = T::lit(v);
    }
    let t = FrequencyTemplate {
        w,
        blocks: header.blocks,
        sample_rate: header.sample_rate,
        stft: header.stft,
        nnmf: header.nnmf,
    };
    t.validate()?;
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn scalar_divergences() {
        let x = array![[2.0f64]];
        let y = array![[1.0f64]];
        let kl = beta_divergence(&x, &y, Beta::KullbackLeibler).unwrap();
        let is = beta_divergence(&x, &y, Beta::ItakuraSaito).unwrap();
        let eu = beta_divergence(&x, &y, Beta::Euclidean).unwrap();
        assert!((kl - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-12);
        assert!((is - (1.0 - 2f64.ln())).abs() < 1e-12);
        assert!((eu - 0.5).abs() < 1e-12);
    }

    #[test]
    fn identical_inputs_have_zero_divergence() {
        let x = array![[1.0f64, 2.0], [3.0, 0.5]];
        for b in [Beta::ItakuraSaito, Beta::KullbackLeibler, Beta::Euclidean] {
            assert_eq!(beta_divergence(&x, &x, b).unwrap(), 0.0);
        }
    }

    #[test]
    fn zero_model_rejected_for_is_and_kl() {
        let x = array![[1.0f64]];
        let y = array![[0.0f64]];
        assert!(beta_divergence(&x, &y, Beta::ItakuraSaito).is_err());
        assert!(beta_divergence(&x, &y, Beta::KullbackLeibler).is_err());
        assert!(beta_divergence(&x, &y, Beta::Euclidean).is_ok());
        assert!(beta_divergence(&x, &array![[1.0, 2.0]], Beta::Euclidean).is_err());
    }

    #[test]
    fn beta_serializes_as_number() {
        assert_eq!(serde_json::to_string(&Beta::KullbackLeibler).unwrap(), "1");
        assert!(serde_json::from_str::<Beta>("3").is_err());
    }

    #[test]
    fn masks_sum_to_one() {
        let a = array![[0.0f64, 1.0], [5.0, 1e-30]];
        let b = array![[0.0f64, 2.0], [0.0, 3e-30]];
        let c = array![[0.0f64, 3.0], [1.0, 0.0]];
        let m = soft_masks(&[a, b, c], 1e-12);
        for i in 0..2 {
            for j in 0..2 {
                let s: f64 = m.iter().map(|x| x[[i, j]]).sum();
                assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn factorization_trace_decreases() {
        let v = Array2::from_shape_fn((8, 12), |(i, j)| 1.0 + ((i * 7 + j * 3) % 5) as f64);
        let cfg = NnmfConfig {
            max_iter: 50,
            tol: 0.0,
            ..NnmfConfig::default()
        };
        let f = factorize(&v, 3, &cfg, 1).unwrap();
        for w in f.divergence.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9));
        }
    }
}
