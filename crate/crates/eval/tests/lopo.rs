use earpipe_core::features::NormalizationMode;
use earpipe_eval::experiment::{fold_normalizer, Dataset, FoldResult, MacroMetrics};
use earpipe_eval::{lopo_plan, ExperimentConfig};
use earpipe_models::{Confusion, Label, Metrics};
use proptest::prelude::*;

#[test]
fn three_patients_three_folds() {
    let plan = lopo_plan(&["b", "a", "c", "a", "b"]).unwrap();
    assert_eq!(plan.folds.len(), 3);
    let tests: Vec<&str> = plan.folds.iter().map(|f| f.test.as_str()).collect();
    assert_eq!(tests, ["a", "b", "c"]);
    for f in &plan.folds {
        assert!(!f.train.contains(&f.test));
        assert_eq!(f.train.len(), 2);
    }
}

#[test]
fn single_patient_is_rejected() {
    assert!(lopo_plan(&["a", "a"]).is_err());
    assert!(lopo_plan::<&str>(&[]).is_err());
}

proptest! {
    #[test]
    fn every_patient_tested_once(ids in prop::collection::vec(0u8..12, 2..60)) {
        let names: Vec<String> = ids.iter().map(|i| format!("p{i:02}")).collect();
        let mut distinct = names.clone();
        distinct.sort();
        distinct.dedup();
        prop_assume!(distinct.len() >= 2);
        let plan = lopo_plan(&names).unwrap();
        let tested: Vec<String> = plan.folds.iter().map(|f| f.test.clone()).collect();
        prop_assert_eq!(&tested, &distinct);
        for f in &plan.folds {
            prop_assert!(!f.train.contains(&f.test));
            prop_assert_eq!(f.train.len() + 1, distinct.len());
        }
    }

    #[test]
    fn metric_identities(tp in 0usize..500, fp in 0usize..500, tn in 0usize..500, fn_ in 0usize..500) {
        prop_assume!(tp + fp + tn + fn_ > 0);
        let m = Metrics::from_confusion(Confusion { tp, fp, tn, fn_ });
        let total = (tp + fp + tn + fn_) as f64;
        prop_assert!((m.accuracy - (tp + tn) as f64 / total).abs() < 1e-12);
        for s in [&m.seizure, &m.non_seizure] {
            for v in [s.precision, s.recall, s.f1] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            let hm = if s.precision + s.recall > 0.0 {
                2.0 * s.precision * s.recall / (s.precision + s.recall)
            } else {
                0.0
            };
            prop_assert!((s.f1 - hm).abs() < 1e-12);
        }
        prop_assert_eq!(m.seizure.recall, m.seizure_detection_rate);
        prop_assert_eq!(m.non_seizure.recall, m.non_seizure_rate);
        if tp + fn_ > 0 {
            prop_assert!((m.seizure_detection_rate - tp as f64 / (tp + fn_) as f64).abs() < 1e-12);
        }
    }
}

#[test]
fn hand_worked_confusion() {
    let m = Metrics::from_confusion(Confusion { tp: 93, fn_: 7, tn: 97, fp: 3 });
    assert!((m.seizure_detection_rate - 0.93).abs() < 1e-12);
    assert!((m.non_seizure_rate - 0.97).abs() < 1e-12);
    assert!((m.accuracy - 0.95).abs() < 1e-12);
}

#[test]
fn constant_predictor_on_balanced_fold() {
    let truth: Vec<Label> = (0..40).map(|i| if i % 2 == 0 { Label::Seizure } else { Label::NonSeizure }).collect();
    let m = Metrics::from_predictions(&truth, &[Label::NonSeizure; 40]);
    assert_eq!(m.accuracy, 0.5);
    assert_eq!(m.seizure.recall, 0.0);
    assert_eq!(m.seizure.f1, 0.0);
}

fn fold(id: usize, acc_num: usize, seizures: bool) -> FoldResult {
    let c = if seizures {
        Confusion { tp: acc_num / 2, fn_: 5 - acc_num / 2, tn: acc_num - acc_num / 2, fp: 5 - (acc_num - acc_num / 2) }
    } else {
        Confusion { tp: 0, fn_: 0, tn: acc_num, fp: 10 - acc_num }
    };
    let metrics = Metrics::from_confusion(c);
    FoldResult {
        fold: id,
        test_patient: format!("p{id}"),
        n_train: 100,
        n_train_balanced: 50,
        n_test: 10,
        specificity_only: !seizures,
        normalizer: String::new(),
        metrics,
    }
}

#[test]
fn macro_accuracy_is_mean_of_folds() {
    let folds = vec![fold(0, 10, true), fold(1, 7, true), fold(2, 4, false)];
    let m = MacroMetrics::of(&folds);
    let mean = folds.iter().map(|f| f.metrics.accuracy).sum::<f64>() / 3.0;
    assert!((m.accuracy - mean).abs() < 1e-15);
    assert_eq!(m.folds_with_seizures, 2);
    // the specificity-only fold does not count towards recall
    let recall = (folds[0].metrics.seizure_detection_rate + folds[1].metrics.seizure_detection_rate) / 2.0;
    assert!((m.seizure_detection_rate - recall).abs() < 1e-15);
}

fn toy_dataset(seed: u64) -> Dataset {
    use rand::Rng;
    let mut r = earpipe_core::rng::stream(seed, 0);
    let mut ds = Dataset::default();
    for p in 0..4 {
        for i in 0..30 {
            ds.rows.push((0..12).map(|_| r.random::<f64>() * (p + 1) as f64).collect());
            ds.labels.push(if i % 3 == 0 { Label::Seizure } else { Label::NonSeizure });
            ds.patients.push(format!("p{p}"));
        }
    }
    ds
}

#[test]
fn normalizer_ignores_held_out_rows() {
    for mode in [NormalizationMode::ZScore, NormalizationMode::MinMax] {
        let mut cfg = ExperimentConfig::default();
        cfg.features.normalization = mode;
        let ds = toy_dataset(5);
        for f in &ds.plan().unwrap().folds {
            let before = fold_normalizer(&ds, f, &cfg).unwrap().fingerprint();
            let mut bent = ds.clone();
            for (i, row) in bent.rows.iter_mut().enumerate() {
                if bent.patients[i] == f.test {
                    for v in row.iter_mut() {
                        *v = *v * -1e6 + 3.0;
                    }
                }
            }
            assert_eq!(fold_normalizer(&bent, f, &cfg).unwrap().fingerprint(), before, "fold {}", f.test);

            // a change on the training side must show up
            let mut moved = ds.clone();
            let j = moved.patients.iter().position(|p| *p != f.test).unwrap();
            moved.rows[j][0] += 1e3;
            assert_ne!(fold_normalizer(&moved, f, &cfg).unwrap().fingerprint(), before);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]
    #[test]
    fn leakage_guard_random_perturbation(seed in 0u64..1000, scale in -1e3f64..1e3, shift in -1e3f64..1e3) {
        let cfg = ExperimentConfig::default();
        let ds = toy_dataset(seed);
        for f in &ds.plan().unwrap().folds {
            let before = fold_normalizer(&ds, f, &cfg).unwrap().fingerprint();
            let mut bent = ds.clone();
            for (i, row) in bent.rows.iter_mut().enumerate() {
                if bent.patients[i] == f.test {
                    for v in row.iter_mut() {
                        *v = *v * scale + shift;
                    }
                }
            }
            prop_assert_eq!(fold_normalizer(&bent, f, &cfg).unwrap().fingerprint(), before);
        }
    }
}
