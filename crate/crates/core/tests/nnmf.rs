mod common;

use common::*;
use earpipe_core::nnmf::{
    beta_divergence, factorize, load_templates, save_templates, separate, train_templates, update_h, update_w, Beta,
    NnmfConfig, TemplateSources,
};
use earpipe_core::signals::Modality;
use earpipe_core::stft::{istft, stft, StftConfig};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> Array2<f64> {
    Array2::from_shape_fn((r, c), |_| 1e-3 + rng.random::<f64>())
}

#[test]
fn is_updates_never_increase_divergence() {
    let started = std::time::Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let eps = 1e-12;
    let mut worst = f64::MIN;
    for _ in 0..50 {
        let v = random_matrix(&mut rng, 64, 128);
        let mut w = random_matrix(&mut rng, 64, 8);
        let mut h = random_matrix(&mut rng, 8, 128);
        let mut prev = beta_divergence(&v, &w.dot(&h), Beta::ItakuraSaito).unwrap();
        for _ in 0..100 {
            update_h(&v, &w, &mut h, Beta::ItakuraSaito, eps);
            let d = beta_divergence(&v, &w.dot(&h), Beta::ItakuraSaito).unwrap();
            worst = worst.max((d - prev) / prev);
            prev = d;
            update_w(&v, &mut w, &h, Beta::ItakuraSaito, eps);
            let d = beta_divergence(&v, &w.dot(&h), Beta::ItakuraSaito).unwrap();
            worst = worst.max((d - prev) / prev);
            prev = d;
            assert!(w.iter().chain(h.iter()).all(|&x| x >= eps));
        }
    }
    println!("worst relative increase {worst:e}, {:?}", started.elapsed());
    assert!(worst < 1e-9);
}

#[test]
fn exact_factorization_is_a_fixed_point() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let w = random_matrix(&mut rng, 64, 6);
    let h0 = random_matrix(&mut rng, 6, 40);
    let v = w.dot(&h0);
    for beta in [Beta::ItakuraSaito, Beta::KullbackLeibler, Beta::Euclidean] {
        let mut h = h0.clone();
        update_h(&v, &w, &mut h, beta, 1e-12);
        let diff: f64 = (&h - &h0).iter().map(|x| x * x).sum::<f64>().sqrt();
        let norm: f64 = h0.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(diff / norm < 1e-10, "{beta:?}: {}", diff / norm);
    }
}

#[test]
fn divergence_scaling_laws() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let x = random_matrix(&mut rng, 16, 16);
    let y = random_matrix(&mut rng, 16, 16);
    let base = |b| beta_divergence(&x, &y, b).unwrap();
    for _ in 0..20 {
        let lam = 10f64.powf(rng.random_range(-2.0..2.0));
        let sx = x.mapv(|v| v * lam);
        let sy = y.mapv(|v| v * lam);
        let d = |b| beta_divergence(&sx, &sy, b).unwrap();
        assert!((d(Beta::ItakuraSaito) - base(Beta::ItakuraSaito)).abs() < 1e-9);
        let kl = base(Beta::KullbackLeibler) * lam;
        assert!((d(Beta::KullbackLeibler) - kl).abs() <= 1e-9 * kl);
        let eu = base(Beta::Euclidean) * lam * lam;
        assert!((d(Beta::Euclidean) - eu).abs() <= 1e-9 * eu);
    }
}

#[test]
fn stft_round_trip_random_signals() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = StftConfig::default();
    for _ in 0..5 {
        let x: Vec<f64> = (0..2500).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let y = istft(&stft(&x, FS, &cfg).unwrap()).unwrap();
        let n = cfg.window_len;
        assert!(rel_err(&y[n..x.len() - n], &x[n..x.len() - n]) < 1e-9);
    }
}

fn tone_cfg() -> NnmfConfig {
    NnmfConfig {
        rank_eeg: 1,
        rank_eog: 1,
        rank_emg: 1,
        ..NnmfConfig::default()
    }
}

fn tone_sources() -> TemplateSources<f64> {
    TemplateSources {
        eeg: vec![tone(10.0, 1.0, 20.0, FS)],
        eog: vec![tone(5.0, 1.0, 20.0, FS)],
        emg: vec![tone(40.0, 1.0, 20.0, FS)],
    }
}

#[test]
fn tone_templates_concentrate_at_the_tone() {
    let cfg = tone_cfg();
    let t = train_templates(&tone_sources(), FS, &StftConfig::default(), &cfg).unwrap();
    let hz = |k: usize| k as f64 * FS / 256.0;
    let eeg = t.w.column(t.block(Modality::Eeg).unwrap().start);
    let mass: f64 = (0..eeg.len()).filter(|&k| (8.0..=12.0).contains(&hz(k))).map(|k| eeg[k]).sum();
    assert!(mass >= 0.9, "mass {mass}");
    for (m, f) in [(Modality::Eog, 5.0), (Modality::Emg, 40.0)] {
        let col = t.w.column(t.block(m).unwrap().start);
        let peak = (0..col.len()).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap();
        assert!((hz(peak) - f).abs() <= 1.0, "{m:?} peak {}", hz(peak));
        assert!((col.sum() - 1.0).abs() < 1e-12);
    }
    let again = train_templates(&tone_sources(), FS, &StftConfig::default(), &cfg).unwrap();
    assert_eq!(t.w, again.w);
}

#[test]
fn zero_source_is_degenerate() {
    let mut s = tone_sources();
    s.emg = vec![vec![0.0; 1000]];
    assert!(train_templates(&s, FS, &StftConfig::default(), &tone_cfg()).is_err());
}

/// Amplitude of the `f` Hz component by projection (integer cycles in the window).
fn tone_amplitude(x: &[f64], f: f64) -> f64 {
    let n = x.len();
    let k = (f * n as f64 / FS).round() as usize;
    2.0 * dft_power(x, k).sqrt() / n as f64
}

#[test]
fn separation_recovers_tones_and_partitions_mixture() {
    let cfg = tone_cfg();
    let stft_cfg = StftConfig::default();
    let t = train_templates(&tone_sources(), FS, &stft_cfg, &cfg).unwrap();
    let eog = tone(5.0, 1.0, 10.0, FS);
    let emg = tone(40.0, 0.5, 10.0, FS);
    let mixed = add(&eog, &emg);
    let out = separate(&mixed, FS, &t, &stft_cfg, &cfg).unwrap();
    let sum: Vec<f64> = (0..mixed.len()).map(|i| out.eeg[i] + out.eog[i] + out.emg[i]).collect();
    let n = stft_cfg.window_len;
    assert!(rel_err(&sum[n..mixed.len() - n], &mixed[n..mixed.len() - n]) <= 1e-6);

    assert!(band_snr_db(&out.eog, FS, 3.0, 7.0) >= 10.0);
    assert!(band_snr_db(&out.emg, FS, 38.0, 42.0) >= 10.0);
    let xt_eog = 20.0 * (tone_amplitude(&out.eog, 40.0) / 0.5).log10();
    let xt_emg = 20.0 * (tone_amplitude(&out.emg, 5.0) / 1.0).log10();
    println!("cross-talk eog {xt_eog:.1} dB emg {xt_emg:.1} dB");
    assert!(xt_eog <= -10.0 && xt_emg <= -10.0);
    assert!(rel_err(&out.eog[n..mixed.len() - n], &eog[n..mixed.len() - n]) < 0.1);
}

#[test]
fn zero_mixture_gives_zero_outputs() {
    let cfg = tone_cfg();
    let stft_cfg = StftConfig::default();
    let t = train_templates(&tone_sources(), FS, &stft_cfg, &cfg).unwrap();
    let out = separate(&vec![0.0; 1000], FS, &t, &stft_cfg, &cfg).unwrap();
    for m in Modality::ALL {
        assert!(out.get(m).iter().all(|&v| v == 0.0));
    }
}

#[test]
fn bin_count_mismatch_rejected() {
    let cfg = tone_cfg();
    let t = train_templates(&tone_sources(), FS, &StftConfig::default(), &cfg).unwrap();
    let other = StftConfig { window_len: 128, hop: 64 };
    assert!(separate(&vec![1.0; 1000], FS, &t, &other, &cfg).is_err());
}

#[test]
fn template_file_round_trip() {
    let t = train_templates(&tone_sources(), FS, &StftConfig::default(), &tone_cfg()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("w.tpl");
    save_templates(&t, &p).unwrap();
    let back = load_templates::<f64>(&p).unwrap();
    assert_eq!(back, t);
    let mut bytes = std::fs::read(&p).unwrap();
    bytes.truncate(bytes.len() - 3);
    std::fs::write(&p, bytes).unwrap();
    assert!(load_templates::<f64>(&p).is_err());
}

#[test]
fn full_factorization_reduces_divergence() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let v = random_matrix(&mut rng, 20, 30);
    let f = factorize(&v, 4, &NnmfConfig::default(), 0).unwrap();
    assert!(f.divergence.last().unwrap() < &f.divergence[0]);
}
