use earpipe_core::rng::stream;
use earpipe_models::file::{decode, encode, Model};
use earpipe_models::forest::{rfc_train, train_tree, ForestConfig, MaxFeatures};
use earpipe_models::knn::knn_train;
use earpipe_models::labels::to_sign;
use earpipe_models::svm::{rbf, svm_solve, svm_train, SvmConfig};
use earpipe_models::Label;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Two Gaussian blobs whose centres are `margin` apart along every axis.
fn blobs(n: usize, d: usize, margin: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<Label>) {
    let mut r = stream(seed, 11);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let s = i % 2 == 1;
        let c = if s { margin / 2.0 } else { -margin / 2.0 };
        x.push((0..d).map(|_| c + 0.5 * Distribution::<f64>::sample(&StandardNormal, &mut r)).collect());
        y.push(if s { Label::Seizure } else { Label::NonSeizure });
    }
    (x, y)
}

fn accuracy(pred: impl Fn(&[f64]) -> Label, x: &[Vec<f64>], y: &[Label]) -> f64 {
    x.iter().zip(y).filter(|(r, l)| pred(r) == **l).count() as f64 / y.len() as f64
}

#[test]
fn all_classifiers_separate_blobs() {
    let (xt, yt) = blobs(200, 4, 2.0, 1);
    let (xh, yh) = blobs(200, 4, 2.0, 2);
    let svm = svm_train(&xt, &yt, &SvmConfig::default()).unwrap();
    let knn = knn_train(&xt, &yt, 5).unwrap();
    let rfc = rfc_train(&xt, &yt, &ForestConfig::default()).unwrap();
    for (name, train, held) in [
        ("svm", accuracy(|r| svm.predict(r).unwrap(), &xt, &yt), accuracy(|r| svm.predict(r).unwrap(), &xh, &yh)),
        ("knn", accuracy(|r| knn.predict(r).unwrap(), &xt, &yt), accuracy(|r| knn.predict(r).unwrap(), &xh, &yh)),
        ("rfc", accuracy(|r| rfc.predict(r).unwrap(), &xt, &yt), accuracy(|r| rfc.predict(r).unwrap(), &xh, &yh)),
    ] {
        assert!(train >= 0.99, "{name} train accuracy {train}");
        assert!(held >= 0.95, "{name} held-out accuracy {held}");
    }
}

#[test]
fn knn_matches_sorting_oracle() {
    let (x, y) = blobs(150, 3, 0.5, 3);
    let model = knn_train(&x, &y, 5).unwrap();
    let mut r = stream(4, 0);
    for _ in 0..100 {
        let q: Vec<f64> = (0..3).map(|_| r.random_range(-2.0..2.0)).collect();
        let mut order: Vec<(f64, usize)> = x
            .iter()
            .enumerate()
            .map(|(i, p)| (p.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>(), i))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let expect: Vec<usize> = order[..5].iter().map(|p| p.1).collect();
        assert_eq!(model.neighbors(&q).unwrap(), expect);
        let seizures = expect.iter().filter(|&&i| y[i] == Label::Seizure).count();
        let want = if seizures > 2 { Label::Seizure } else { Label::NonSeizure };
        assert_eq!(model.predict(&q).unwrap(), want);
    }
}

#[test]
fn knn_is_invariant_to_uniform_scaling() {
    let (x, y) = blobs(80, 3, 0.7, 5);
    let scaled: Vec<Vec<f64>> = x.iter().map(|r| r.iter().map(|v| v * 7.5).collect()).collect();
    let a = knn_train(&x, &y, 5).unwrap();
    let b = knn_train(&scaled, &y, 5).unwrap();
    let (q, _) = blobs(50, 3, 0.7, 6);
    for row in &q {
        let s: Vec<f64> = row.iter().map(|v| v * 7.5).collect();
        assert_eq!(a.neighbors(row).unwrap(), b.neighbors(&s).unwrap());
    }
}

#[test]
fn svm_solution_satisfies_kkt_and_reproduces_decision() {
    let (x, y) = blobs(120, 3, 1.0, 7);
    let cfg = SvmConfig::default();
    let sol = svm_solve(&x, &y, &cfg).unwrap();
    let eq: f64 = sol.alpha.iter().zip(&y).map(|(a, l)| a * to_sign(*l)).sum();
    assert!(eq.abs() < 1e-8, "sum alpha y = {eq}");
    // Dual optimality with the solver's tolerance: margins outside the box
    // bounds must sit on the right side.
    let tol = 5.0 * cfg.tol;
    for i in 0..x.len() {
        let yi = to_sign(y[i]);
        let f = sol.model.decision(&x[i]).unwrap();
        let m = yi * f;
        let a = sol.alpha[i];
        assert!((0.0..=cfg.c + 1e-9).contains(&a));
        if a < 1e-9 {
            assert!(m >= 1.0 - tol, "free-of-support point {i} margin {m}");
        } else if a > cfg.c - 1e-9 {
            assert!(m <= 1.0 + tol, "bounded point {i} margin {m}");
        } else {
            assert!((m - 1.0).abs() <= tol, "support point {i} margin {m}");
        }
        // Oracle decision from the full alpha vector.
        let direct: f64 = (0..x.len())
            .map(|j| sol.alpha[j] * to_sign(y[j]) * rbf(&x[i], &x[j], cfg.gamma))
            .sum::<f64>()
            + sol.model.bias;
        assert!((direct - f).abs() < 1e-9);
    }
}

#[test]
fn svm_ignores_row_order() {
    let (x, y) = blobs(80, 3, 1.0, 8);
    let a = svm_train(&x, &y, &SvmConfig::default()).unwrap();
    let xr: Vec<Vec<f64>> = x.iter().rev().cloned().collect();
    let yr: Vec<Label> = y.iter().rev().cloned().collect();
    let b = svm_train(&xr, &yr, &SvmConfig::default()).unwrap();
    let (q, _) = blobs(40, 3, 1.0, 9);
    for row in &q {
        let (da, db) = (a.decision(row).unwrap(), b.decision(row).unwrap());
        assert!((da - db).abs() < 0.05 * (1.0 + da.abs()), "{da} vs {db}");
    }
}

#[test]
fn single_full_feature_tree_forest_equals_tree() {
    let (x, y) = blobs(100, 4, 0.8, 10);
    let cfg = ForestConfig {
        n_trees: 1,
        max_features: MaxFeatures::All,
        bootstrap: false,
        ..ForestConfig::default()
    };
    let forest = rfc_train(&x, &y, &cfg).unwrap();
    let tree = train_tree(&x, &y, (0..x.len()).collect(), cfg.max_depth, MaxFeatures::All, &mut stream(0, 1)).unwrap();
    assert_eq!(forest.trees[0], tree);
    // Fully grown on distinct points, the tree memorizes the data.
    assert_eq!(accuracy(|r| tree.predict(r), &x, &y), 1.0);
}

#[test]
fn forest_matches_vote_oracle_and_is_deterministic() {
    let (x, y) = blobs(120, 5, 0.6, 12);
    let cfg = ForestConfig { rng_seed: 3, ..ForestConfig::default() };
    let a = rfc_train(&x, &y, &cfg).unwrap();
    assert_eq!(a, rfc_train(&x, &y, &cfg).unwrap());
    let mut r = stream(13, 0);
    for _ in 0..100 {
        let q: Vec<f64> = (0..5).map(|_| r.random_range(-2.0..2.0)).collect();
        let s = a.trees.iter().filter(|t| t.predict(&q) == Label::Seizure).count();
        let want = if 2 * s > a.trees.len() { Label::Seizure } else { Label::NonSeizure };
        assert_eq!(a.predict(&q).unwrap(), want);
    }
}

#[test]
fn classical_model_files_round_trip() {
    let (x, y) = blobs(60, 3, 1.0, 14);
    let models = [
        Model::Svm(svm_train(&x, &y, &SvmConfig::default()).unwrap()),
        Model::Knn(knn_train(&x, &y, 5).unwrap()),
        Model::Forest(rfc_train(&x, &y, &ForestConfig::default()).unwrap()),
    ];
    for m in models {
        let bytes = encode(&m).unwrap();
        assert_eq!(decode(&bytes).unwrap(), m, "{}", m.kind());
        assert_eq!(encode(&decode(&bytes).unwrap()).unwrap(), bytes);
    }
    assert!(decode(b"{\"format\":\"other\"}\n").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]
    #[test]
    fn svm_training_accuracy_on_separable_blobs(seed in 0u64..1000) {
        let (x, y) = blobs(40, 2, 4.0, seed);
        let m = svm_train(&x, &y, &SvmConfig::default()).unwrap();
        prop_assert_eq!(accuracy(|r| m.predict(r).unwrap(), &x, &y), 1.0);
    }
}
