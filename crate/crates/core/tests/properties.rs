mod common;

use common::*;
use earpipe_core::emd::{emd_decompose, EmdConfig};
use earpipe_core::features::{
    balance_indices, feature_vector, label_window, time_features, BalanceRatio, BalanceSpec, Label, LabeledEpoch,
    MfccConfig, WindowSpec, FEATURES_PER_CHANNEL,
};
use earpipe_core::nnmf::{soft_masks, update_h, update_w, Beta};
use earpipe_core::signals::SeizureAnnotation;
use earpipe_core::stft::{istft, stft, StftConfig};
use ndarray::Array2;
use proptest::prelude::*;

fn brute_force_label(start: f64, end: f64, ann: &[(f64, f64)]) -> Label {
    for &(a, b) in ann {
        if a <= start && end <= b {
            return Label::Seizure;
        }
    }
    Label::NonSeizure
}

fn annotations() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((0.0f64..200.0, 10.0f64..60.0).prop_map(|(a, len)| (a, a + len)), 0..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn window_count_formula(duration in 10.0f64..400.0, stride in 1u32..=9) {
        let spec = WindowSpec::new(stride).unwrap();
        let want = ((duration - 10.0) / stride as f64).floor() as usize + 1;
        prop_assert_eq!(spec.count(duration), want);
    }

    #[test]
    fn labeling_matches_brute_force(ann in annotations(), start in 0u32..250) {
        let list: Vec<SeizureAnnotation> = ann.iter().map(|&(a, b)| SeizureAnnotation::new(a, b, "s")).collect();
        let s = start as f64;
        prop_assert_eq!(label_window(s, s + 10.0, &list), brute_force_label(s, s + 10.0, &ann));
    }

    #[test]
    fn shrinking_annotation_never_creates_seizure(
        ann in annotations(), start in 0u32..250, cut_lo in 0.0f64..5.0, cut_hi in 0.0f64..5.0
    ) {
        let full: Vec<SeizureAnnotation> = ann.iter().map(|&(a, b)| SeizureAnnotation::new(a, b, "s")).collect();
        let shrunk: Vec<SeizureAnnotation> =
            ann.iter().map(|&(a, b)| SeizureAnnotation::new(a + cut_lo, b - cut_hi, "s")).collect();
        let s = start as f64;
        if label_window(s, s + 10.0, &full) == Label::NonSeizure {
            prop_assert_eq!(label_window(s, s + 10.0, &shrunk), Label::NonSeizure);
        }
    }

    #[test]
    fn balance_keeps_every_minority_item(n_sz in 1usize..30, extra in 0usize..80, k in 1u32..=3, seed in any::<u64>()) {
        let n_non = n_sz * k as usize + extra;
        let mut labels = vec![Label::Seizure; n_sz];
        labels.extend(vec![Label::NonSeizure; n_non]);
        let idx = balance_indices(&labels, &BalanceSpec { ratio: BalanceRatio(k), rng_seed: seed }).unwrap();
        prop_assert_eq!(idx.iter().filter(|&&i| i < n_sz).count(), n_sz);
        prop_assert_eq!(idx.iter().filter(|&&i| i >= n_sz).count(), n_sz * k as usize);
    }

    #[test]
    fn masks_partition_unity(vals in prop::collection::vec(0.0f64..1e3, 3 * 12)) {
        let p: Vec<Array2<f64>> = vals.chunks(12).map(|c| Array2::from_shape_vec((3, 4), c.to_vec()).unwrap()).collect();
        let m = soft_masks(&p, 1e-12);
        for i in 0..3 {
            for j in 0..4 {
                let s: f64 = m.iter().map(|x| x[[i, j]]).sum();
                prop_assert!((s - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn updates_preserve_nonnegativity(vals in prop::collection::vec(0.0f64..10.0, 6 * 8), beta in 0u8..3) {
        let beta = Beta::try_from(beta).unwrap();
        let v = Array2::from_shape_vec((6, 8), vals).unwrap().mapv(|x| x.max(1e-12));
        let mut w = Array2::from_elem((6, 2), 0.5);
        let mut h = Array2::from_elem((2, 8), 0.5);
        for _ in 0..5 {
            update_h(&v, &w, &mut h, beta, 1e-12);
            update_w(&v, &mut w, &h, beta, 1e-12);
        }
        prop_assert!(w.iter().chain(h.iter()).all(|&x| x >= 1e-12 && x.is_finite()));
    }

    #[test]
    fn stft_round_trip(x in prop::collection::vec(-1.0f64..1.0, 300..1200)) {
        let cfg = StftConfig::default();
        let y = istft(&stft(&x, FS, &cfg).unwrap()).unwrap();
        prop_assert!(rel_err(&y, &x) < 1e-9);
    }

    #[test]
    fn emd_is_additive(x in prop::collection::vec(-1.0f64..1.0, 64..400)) {
        let set = emd_decompose(&x, &EmdConfig::default()).unwrap();
        prop_assert!(rel_err(&set.reconstruct(), &x) <= 1e-8);
    }

    #[test]
    fn time_features_shift_mean_only(x in prop::collection::vec(-5.0f64..5.0, 10..200), c in -10.0f64..10.0) {
        let a = time_features(&x);
        let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
        let b = time_features(&shifted);
        prop_assert!((b[0] - a[0] - c).abs() < 1e-9);
        for j in 1..3 {
            prop_assert!((b[j] - a[j]).abs() < 1e-9);
        }
    }
}

fn random_epoch(seed: u64) -> LabeledEpoch {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    LabeledEpoch {
        patient_id: "p".into(),
        start_s: 0.0,
        channels: (0..6).map(|_| (0..2500).map(|_| rng.random::<f64>() - 0.5).collect()).collect(),
        label: Label::NonSeizure,
    }
}

#[test]
fn channel_permutation_permutes_blocks() {
    let cfg = MfccConfig::default();
    let e = random_epoch(1);
    let base = feature_vector(&e, &cfg).unwrap();
    let mut swapped = e.clone();
    swapped.channels.swap(1, 4);
    let v = feature_vector(&swapped, &cfg).unwrap();
    for ch in 0..6 {
        let src = match ch {
            1 => 4,
            4 => 1,
            other => other,
        };
        assert_eq!(v.channel_block(ch), base.channel_block(src));
    }
    assert_eq!(v.values.len(), 6 * FEATURES_PER_CHANNEL);
    assert_eq!(feature_vector(&e, &cfg).unwrap(), base);
}

#[test]
fn normal_window_moments() {
    use rand::SeedableRng;
    use rand_distr::{Distribution, StandardNormal};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
    let x: Vec<f64> = (0..2500).map(|_| StandardNormal.sample(&mut rng)).collect();
    let f = time_features(&x);
    assert!(f[3].abs() < 0.2, "skew {}", f[3]);
    assert!((f[4] - 3.0).abs() < 0.5, "kurt {}", f[4]);
}

#[test]
fn mfcc_discriminates_noise_from_tone() {
    let cfg = MfccConfig::default();
    let t = tone(10.0, 1.0, 10.0, FS);
    let n = random_epoch(3).channels[0].clone();
    let a = earpipe_core::features::mfcc_features(&t, &cfg).unwrap();
    let b = earpipe_core::features::mfcc_features(&n, &cfg).unwrap();
    let d: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    assert!(d > 0.0);
    assert_eq!(a, earpipe_core::features::mfcc_features(&t, &cfg).unwrap());
}
