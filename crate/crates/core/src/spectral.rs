//! Small spectral and statistical helpers shared by several stages.

use num_complex::Complex;
use rustfft::FftPlanner;

use crate::scalar::Real;

/// In-place forward FFT of a complex buffer.
pub fn fft_forward<T: Real>(buf: &mut [Complex<T>]) {
    if buf.is_empty() {
        return;
    }
    FftPlanner::new().plan_fft_forward(buf.len()).process(buf);
}

/// In-place inverse FFT, normalized by `1/n`.
pub fn fft_inverse<T: Real>(buf: &mut [Complex<T>]) {
    if buf.is_empty() {
        return;
    }
    FftPlanner::new().plan_fft_inverse(buf.len()).process(buf);
    let scale = T::one() / T::from_usize_lossy(buf.len());
    for v in buf.iter_mut() {
        *v = *v * scale;
    }
}

pub fn to_complex<T: Real>(x: &[T]) -> Vec<Complex<T>> {
    x.iter().map(|&v| Complex::new(v, T::zero())).collect()
}

/// Magnitude of the analytic signal (Hilbert envelope).
pub fn analytic_envelope<T: Real>(x: &[T]) -> Vec<T> {
    let n = x.len();
    if n == 0 {
        return Vec::new();
    }
    let mut buf = to_complex(x);
    fft_forward(&mut buf);
    let two = T::lit(2.0);
    for (k, v) in buf.iter_mut().enumerate() {
        if k == 0 || (n % 2 == 0 && k == n / 2) {
            continue;
        } else if k < n.div_ceil(2) {
            *v = *v * two;
        } else {
            *v = Complex::new(T::zero(), T::zero());
        }
    }
    fft_inverse(&mut buf);
    buf.iter().map(|c| c.norm()).collect()
}

/// Centered moving average with a window of `width` samples, shrinking at the edges.
pub fn moving_average<T: Real>(x: &[T], width: usize) -> Vec<T> {
    let n = x.len();
    if width <= 1 || n == 0 {
        return x.to_vec();
    }
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(T::zero());
    let mut acc = T::zero();
    for &v in x {
        acc = acc + v;
        prefix.push(acc);
    }
    let before = (width - 1) / 2;
    let after = width - 1 - before;
    (0..n)
        .map(|i| {
            let a = i.saturating_sub(before);
            let b = (i + after + 1).min(n);
            (prefix[b] - prefix[a]) / T::from_usize_lossy(b - a)
        })
        .collect()
}

/// Pearson correlation; zero when either input has zero variance.
pub fn pearson<T: Real>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    if n < 2 {
        return T::zero();
    }
    let nf = T::from_usize_lossy(n);
    let ma = a[..n].iter().copied().sum::<T>() / nf;
    let mb = b[..n].iter().copied().sum::<T>() / nf;
    let (mut sab, mut saa, mut sbb) = (T::zero(), T::zero(), T::zero());
    for (&x, &y) in a[..n].iter().zip(&b[..n]) {
        let (dx, dy) = (x - ma, y - mb);
        sab = sab + dx * dy;
        saa = saa + dx * dx;
        sbb = sbb + dy * dy;
    }
    // relative floor: variance indistinguishable from rounding noise counts as zero
    let noise = T::lit(64.0) * T::epsilon();
    let tiny = noise * noise;
    let scale_a = a[..n].iter().fold(T::zero(), |m, v| m.max(v.abs()));
    let scale_b = b[..n].iter().fold(T::zero(), |m, v| m.max(v.abs()));
    if saa <= tiny * nf * scale_a * scale_a || sbb <= tiny * nf * scale_b * scale_b {
        return T::zero();
    }
    let r = sab / (saa.sqrt() * sbb.sqrt());
    r.max(-T::one()).min(T::one())
}

/// Linear interpolation of a uniformly sampled series at arbitrary times.
pub fn interpolate_at<T: Real>(x: &[T], rate: f64, times: &[f64]) -> Vec<T> {
    let n = x.len();
    times
        .iter()
        .map(|&t| {
            if n == 0 {
                return T::zero();
            }
            let pos = (t * rate).max(0.0);
            let i = pos.floor() as usize;
            if i + 1 >= n {
                return x[n - 1];
            }
            let frac = T::lit(pos - i as f64);
            x[i] + (x[i + 1] - x[i]) * frac
        })
        .collect()
}

/// Periodic Hann window of length `n`.
pub fn hann<T: Real>(n: usize) -> Vec<T> {
    (0..n)
        .map(|i| {
            let phase = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            T::lit(0.5 - 0.5 * phase.cos())
        })
        .collect()
}

/// Welch power spectral density (one-sided, Hann segments).
/// Returns bin frequencies in Hz and the density estimate.
pub fn welch_psd<T: Real>(x: &[T], fs: f64, seg_len: usize, overlap: usize) -> (Vec<f64>, Vec<T>) {
    let seg_len = seg_len.min(x.len()).max(1);
    let step = seg_len.saturating_sub(overlap).max(1);
    let window: Vec<T> = hann(seg_len);
    let win_energy: T = window.iter().map(|w| *w * *w).sum();
    let bins = seg_len / 2 + 1;
    let mut psd = vec![T::zero(); bins];
    let mut count = 0usize;
    let mut start = 0;
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(seg_len);
    while start + seg_len <= x.len() {
        let seg = &x[start..start + seg_len];
        let mean = seg.iter().copied().sum::<T>() / T::from_usize_lossy(seg_len);
        let mut buf: Vec<Complex<T>> = seg
            .iter()
            .zip(&window)
            .map(|(&v, &w)| Complex::new((v - mean) * w, T::zero()))
            .collect();
        fft.process(&mut buf);
        for (p, c) in psd.iter_mut().zip(&buf) {
            *p = *p + c.norm_sqr();
        }
        count += 1;
        start += step;
    }
    let norm = T::lit(fs) * win_energy * T::from_usize_lossy(count.max(1));
    let two = T::lit(2.0);
    for (k, p) in psd.iter_mut().enumerate() {
        *p = *p / norm;
        if k != 0 && !(seg_len % 2 == 0 && k == seg_len / 2) {
            *p = *p * two;
        }
    }
    let freqs = (0..bins).map(|k| k as f64 * fs / seg_len as f64).collect();
    (freqs, psd)
}
