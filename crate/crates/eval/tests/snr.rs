use std::f64::consts::PI;

use earpipe_core::rng::stream;
use earpipe_core::signals::Band;
use earpipe_eval::snr::snr_report;
use earpipe_eval::{compare_snr, snr};
use rand_distr::{Distribution, StandardNormal};

const FS: f64 = 250.0;
const ALPHA: Band = Band::new(8.0, 12.0);

fn tone(hz: f64, secs: f64) -> Vec<f64> {
    (0..(secs * FS) as usize).map(|i| (2.0 * PI * hz * i as f64 / FS).sin()).collect()
}

fn white(n: usize, seed: u64) -> Vec<f64> {
    let mut r = stream(seed, 0);
    (0..n).map(|_| Distribution::<f64>::sample(&StandardNormal, &mut r)).collect()
}

#[test]
fn white_noise_is_zero_db() {
    for seed in 0..10 {
        let db = snr(&white(15000, seed), ALPHA, FS).unwrap();
        assert!(db.abs() <= 0.5, "seed {seed}: {db} dB");
    }
}

#[test]
fn in_band_tone_dominates() {
    let db = snr(&tone(10.0, 10.0), ALPHA, FS).unwrap();
    assert!(db >= 30.0, "{db}");
}

#[test]
fn out_of_band_tone_is_suppressed() {
    let db = snr(&tone(60.0, 10.0), ALPHA, FS).unwrap();
    assert!(db <= -20.0, "{db}");
}

#[test]
fn full_spectrum_and_inverted_bands_are_rejected() {
    let x = white(2500, 1);
    assert!(snr(&x, Band::new(0.0, FS / 2.0), FS).is_err());
    assert!(snr(&x, Band::new(12.0, 8.0), FS).is_err());
    assert!(snr(&x, Band::new(8.0, 200.0), FS).is_err());
}

#[test]
fn report_uses_ten_second_epochs() {
    let r = snr_report(&white(250 * 65, 2), ALPHA, FS).unwrap();
    assert_eq!(r.epoch_db.len(), 6);
    let mean = r.epoch_db.iter().sum::<f64>() / 6.0;
    assert!((r.mean_db - mean).abs() < 1e-12);
}

#[test]
fn identical_inputs_have_zero_delta() {
    let x: Vec<f64> = tone(10.0, 30.0).iter().zip(white(7500, 3)).map(|(a, b)| a + 0.3 * b).collect();
    let c = compare_snr(&x, &x, &[ALPHA, Band::new(0.5, 4.0)], FS).unwrap();
    assert_eq!(c.len(), 2);
    for cmp in c {
        assert_eq!(cmp.delta_db, 0.0);
    }
}

#[test]
fn adding_out_of_band_noise_lowers_snr() {
    let x: Vec<f64> = tone(10.0, 30.0).iter().zip(white(7500, 4)).map(|(a, b)| a + 0.1 * b).collect();
    let y: Vec<f64> = x.iter().zip(tone(40.0, 30.0)).map(|(a, b)| a + 2.0 * b).collect();
    let c = compare_snr(&x, &y, &[ALPHA], FS).unwrap();
    assert!(c[0].delta_db < 0.0, "{}", c[0].delta_db);
}

#[test]
fn length_mismatch_is_an_error() {
    let x = tone(10.0, 20.0);
    assert!(compare_snr(&x, &x[..4000], &[ALPHA], FS).is_err());
}
