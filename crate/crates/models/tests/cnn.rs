use earpipe_core::rng::stream;
use earpipe_models::cnn::{cnn_train, focal_loss, softmax, Cnn1d, CnnConfig, FocalConfig, Mode, TrainConfig};
use earpipe_models::file::{decode, encode, Model};
use earpipe_models::Label;
use proptest::prelude::*;
use rand::Rng;

fn small_cfg(seed: u64) -> CnnConfig {
    CnnConfig {
        in_channels: 2,
        in_len: 64,
        filters: vec![2, 2, 2],
        hidden: vec![4, 4, 4],
        init_seed: seed,
        ..CnnConfig::default()
    }
}

fn loss_at(net: &Cnn1d, x: &[f64], target: usize, mask_seed: u64) -> f64 {
    let mut rng = stream(mask_seed, 0);
    let cache = net.forward(x, Mode::Train(&mut rng)).unwrap();
    focal_loss(&cache.probs, target, 0.6, 2.0).unwrap().0
}

#[test]
fn backward_matches_central_differences() {
    let h = 1e-4;
    for seed in 0..3u64 {
        let mut net = Cnn1d::new(small_cfg(seed)).unwrap();
        let mut r = stream(seed, 77);
        // Zero biases put dead units exactly on the ReLU kink.
        for t in net.params.iter_mut().filter(|t| t.shape.len() == 1) {
            t.data.iter_mut().for_each(|v| *v = r.random_range(-0.2..0.2));
        }
        let x: Vec<f64> = (0..128).map(|_| r.random_range(-1.0..1.0)).collect();
        let target = (seed % 2) as usize;
        let mut rng = stream(seed + 100, 0);
        let cache = net.forward(&x, Mode::Train(&mut rng)).unwrap();
        let (_, dlogits) = focal_loss(&cache.probs, target, 0.6, 2.0).unwrap();
        let analytic = net.backward(&cache, &dlogits);
        for (ti, t) in net.params.iter().enumerate() {
            let mut numeric = vec![0.0; t.data.len()];
            for i in 0..t.data.len() {
                let mut plus = net.clone();
                plus.params[ti].data[i] += h;
                let mut minus = net.clone();
                minus.params[ti].data[i] -= h;
                numeric[i] = (loss_at(&plus, &x, target, seed + 100) - loss_at(&minus, &x, target, seed + 100)) / (2.0 * h);
            }
            let diff: f64 = analytic[ti].iter().zip(&numeric).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let na: f64 = analytic[ti].iter().map(|a| a * a).sum::<f64>().sqrt();
            let nn: f64 = numeric.iter().map(|a| a * a).sum::<f64>().sqrt();
            let rel = diff / (na + nn).max(1e-12);
            assert!(rel < 1e-4 || diff < 1e-10, "seed {seed} tensor {}: relative error {rel:e}", t.name);
        }
    }
}

#[test]
fn eval_forward_is_deterministic_and_normalized() {
    let net = Cnn1d::new(small_cfg(5)).unwrap();
    let x: Vec<f64> = (0..128).map(|i| (i as f64 * 0.37).sin()).collect();
    let a = net.predict_proba(&x).unwrap();
    let b = net.predict_proba(&x).unwrap();
    assert_eq!(a, b);
    assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    let s = softmax(&[1000.0, -1000.0, 3.0]);
    assert!((s.iter().sum::<f64>() - 1.0).abs() < 1e-12 && s.iter().all(|v| v.is_finite()));
}

proptest! {
    #[test]
    fn focal_gradient_matches_finite_differences(z0 in -4.0f64..4.0, z1 in -4.0f64..4.0, target in 0usize..2, gamma in 0.0f64..3.0, alpha in 0.1f64..1.0) {
        let (_, g) = focal_loss(&softmax(&[z0, z1]), target, alpha, gamma).unwrap();
        let h = 1e-6;
        for j in 0..2 {
            let mut p = [z0, z1];
            let mut m = [z0, z1];
            p[j] += h;
            m[j] -= h;
            let fd = (focal_loss(&softmax(&p), target, alpha, gamma).unwrap().0
                - focal_loss(&softmax(&m), target, alpha, gamma).unwrap().0) / (2.0 * h);
            prop_assert!((fd - g[j]).abs() < 1e-6 * (1.0 + fd.abs()), "j={} fd={} g={}", j, fd, g[j]);
        }
    }
}

fn toy_data(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<Label>) {
    let mut r = stream(seed, 3);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        let seizure = i % 2 == 0;
        let f = if seizure { 0.8 } else { 0.15 };
        let row: Vec<f64> = (0..128)
            .map(|t| (f * (t % 64) as f64).sin() + 0.1 * r.random_range(-1.0..1.0))
            .collect();
        x.push(row);
        y.push(if seizure { Label::Seizure } else { Label::NonSeizure });
    }
    (x, y)
}

fn toy_train(seed: u64, epochs: usize) -> (Cnn1d, earpipe_models::cnn::TrainReport) {
    let (x, y) = toy_data(200, 1);
    let mut model = small_cfg(seed);
    model.filters = vec![4, 4, 4];
    model.hidden = vec![16, 16, 8];
    model.dropout = 0.1;
    let cfg = TrainConfig {
        epochs,
        rng_seed: seed,
        adam: earpipe_models::cnn::AdamConfig { lr: 1e-2, ..Default::default() },
        ..TrainConfig::default()
    };
    cnn_train(&x, &y, &model, &cfg, &FocalConfig::default()).unwrap()
}

#[test]
fn training_reduces_loss_on_separable_data() {
    let (_, report) = toy_train(4, 50);
    let first = report.train_loss[0];
    let last = *report.train_loss.last().unwrap();
    assert!(last <= 0.1 * first, "loss {first} -> {last}");
    assert!(report.test.accuracy >= 0.9, "test accuracy {}", report.test.accuracy);
    assert_eq!(report.n_train + report.n_val + report.n_test, 200);
}

#[test]
fn training_is_seed_deterministic() {
    let (a, ra) = toy_train(9, 3);
    let (b, rb) = toy_train(9, 3);
    assert_eq!(a, b);
    assert_eq!(ra, rb);
    let (c, _) = toy_train(10, 3);
    assert_ne!(a, c);
}

#[test]
fn model_file_round_trip_preserves_predictions() {
    let net = Cnn1d::new(small_cfg(2)).unwrap();
    let bytes = encode(&Model::Cnn(net.clone())).unwrap();
    let Model::Cnn(back) = decode(&bytes).unwrap() else {
        panic!("wrong kind")
    };
    assert_eq!(back, net);
    let truncated = &bytes[..bytes.len() - 3];
    let err = decode(truncated).unwrap_err().to_string();
    assert!(err.contains("byte"), "{err}");
}

#[test]
fn rejects_wrong_input_length() {
    let net = Cnn1d::new(small_cfg(0)).unwrap();
    assert!(net.predict(&[0.0; 10]).is_err());
}
