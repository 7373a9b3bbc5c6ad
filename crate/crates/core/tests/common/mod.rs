//! Independent oracles for the integration tests. Nothing here calls into the
//! crate's FFT or filter paths.
#![allow(dead_code)]

use std::f64::consts::PI;

pub const FS: f64 = 250.0;

pub fn tone(freq: f64, amp: f64, secs: f64, fs: f64) -> Vec<f64> {
    (0..(secs * fs).round() as usize)
        .map(|i| amp * (2.0 * PI * freq * i as f64 / fs).sin())
        .collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

pub fn l2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    l2(&d) / l2(b).max(f64::MIN_POSITIVE)
}

/// Power at DFT bin `k` by direct summation.
pub fn dft_power(x: &[f64], k: usize) -> f64 {
    let n = x.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for (i, v) in x.iter().enumerate() {
        let ph = -2.0 * PI * k as f64 * i as f64 / n;
        re += v * ph.cos();
        im += v * ph.sin();
    }
    re * re + im * im
}

/// Frequency of the largest non-DC DFT bin, by brute-force summation.
pub fn dominant_frequency(x: &[f64], fs: f64) -> f64 {
    let n = x.len();
    let mut best = (0usize, -1.0);
    for k in 1..n / 2 {
        let p = dft_power(x, k);
        if p > best.1 {
            best = (k, p);
        }
    }
    best.0 as f64 * fs / n as f64
}

/// Mean in-band over mean out-of-band periodogram power, in dB, by direct DFT.
pub fn band_snr_db(x: &[f64], fs: f64, lo: f64, hi: f64) -> f64 {
    let n = x.len();
    let (mut pin, mut nin, mut pout, mut nout) = (0.0, 0, 0.0, 0);
    for k in 1..n / 2 {
        let f = k as f64 * fs / n as f64;
        let p = dft_power(x, k);
        if f >= lo && f <= hi {
            pin += p;
            nin += 1;
        } else {
            pout += p;
            nout += 1;
        }
    }
    10.0 * ((pin / nin as f64) / (pout / nout as f64)).log10()
}
