//! Leave-one-patient-out runs and the stride / ratio / motion sweeps.

use std::path::Path;

use earpipe_core::features::{
    apply_normalizer, balance_indices, fit_normalizer, BalanceRatio, BalanceSpec, FeatureTable, LabeledEpoch,
    NormalizationParams,
};
use earpipe_core::nnmf::FrequencyTemplate;
use earpipe_core::signals::{load_recording, Recording};
use earpipe_models::cnn::{cnn_train, CnnConfig};
use earpipe_models::forest::{rfc_train, ForestConfig};
use earpipe_models::knn::knn_train;
use earpipe_models::svm::svm_train;
use earpipe_models::{Label, Metrics};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{fold_seed, seed_tag, ExperimentConfig, ModelKind};
use crate::corpus::generate_corpus;
use crate::error::{EvalError, Result};
use crate::lopo::{lopo_plan, Fold, FoldPlan};
use crate::pipeline::{epochs, feature_table, load_or_train_templates, separate_all};

/// Rows (feature vectors, or raw concatenated channels for the CNN) with
/// labels and the patient each came from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
    pub patients: Vec<String>,
}

impl Dataset {
    pub fn from_table(t: &FeatureTable) -> Dataset {
        Dataset {
            rows: t.matrix(),
            labels: t.labels(),
            patients: t.rows.iter().map(|r| r.patient_id.clone()).collect(),
        }
    }

    pub fn from_epochs(e: &[LabeledEpoch]) -> Dataset {
        Dataset {
            rows: e.iter().map(|x| x.channels.concat()).collect(),
            labels: e.iter().map(|x| x.label).collect(),
            patients: e.iter().map(|x| x.patient_id.clone()).collect(),
        }
    }

    pub fn plan(&self) -> Result<FoldPlan> {
        lopo_plan(&self.patients)
    }

    fn split(&self, fold: &Fold) -> (Vec<usize>, Vec<usize>) {
        (0..self.rows.len()).partition(|&i| self.patients[i] != fold.test)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub rng_seed: u64,
    pub config: ExperimentConfig,
}

impl Provenance {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Provenance {
        Provenance {
            tool: "earpipe".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            rng_seed: cfg.rng_seed,
            config: cfg.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub test_patient: String,
    pub n_train: usize,
    pub n_train_balanced: usize,
    pub n_test: usize,
    /// The held-out patient has no seizure windows; only specificity is meaningful.
    pub specificity_only: bool,
    /// Fingerprint of the fold's normalization parameters (hex).
    pub normalizer: String,
    pub metrics: Metrics,
}

/// Per-fold means; recall and seizure F1 average over folds that contain seizures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MacroMetrics {
    pub folds: usize,
    pub folds_with_seizures: usize,
    pub accuracy: f64,
    pub seizure_detection_rate: f64,
    pub non_seizure_rate: f64,
    pub seizure_f1: f64,
    pub macro_f1: f64,
}

impl MacroMetrics {
    pub fn of(folds: &[FoldResult]) -> MacroMetrics {
        let mean = |v: Vec<f64>| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
        let with_sz: Vec<&FoldResult> = folds.iter().filter(|f| !f.specificity_only).collect();
        MacroMetrics {
            folds: folds.len(),
            folds_with_seizures: with_sz.len(),
            accuracy: mean(folds.iter().map(|f| f.metrics.accuracy).collect()),
            seizure_detection_rate: mean(with_sz.iter().map(|f| f.metrics.seizure_detection_rate).collect()),
            non_seizure_rate: mean(
                folds
                    .iter()
                    .filter(|f| f.metrics.non_seizure.support > 0)
                    .map(|f| f.metrics.non_seizure_rate)
                    .collect(),
            ),
            seizure_f1: mean(with_sz.iter().map(|f| f.metrics.seizure.f1).collect()),
            macro_f1: mean(folds.iter().map(|f| f.metrics.macro_f1).collect()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub provenance: Provenance,
    pub model: String,
    pub n_rows: usize,
    pub folds: Vec<FoldResult>,
    /// Headline numbers: mean over folds.
    pub macro_avg: MacroMetrics,
    /// Pooled confusion matrix over all held-out windows.
    pub micro: Metrics,
}

/// Normalization fitted on the training side of `fold` only.
pub fn fold_normalizer(ds: &Dataset, fold: &Fold, cfg: &ExperimentConfig) -> Result<NormalizationParams> {
    let (train, _) = ds.split(fold);
    let rows: Vec<Vec<f64>> = train.iter().map(|&i| ds.rows[i].clone()).collect();
    Ok(fit_normalizer(
        &rows,
        cfg.features.normalization,
        &format!("fold {} train (held out {})", fold.id, fold.test),
    )?)
}

/// Per-channel z-score for raw CNN input, fitted on the training rows.
fn channel_scaler(rows: &[&Vec<f64>], channels: usize) -> Vec<(f64, f64)> {
    let len = rows.first().map_or(0, |r| r.len() / channels);
    (0..channels)
        .map(|c| {
            let n = (rows.len() * len) as f64;
            let mean = rows.iter().map(|r| r[c * len..(c + 1) * len].iter().sum::<f64>()).sum::<f64>() / n;
            let var = rows
                .iter()
                .map(|r| r[c * len..(c + 1) * len].iter().map(|v| (v - mean).powi(2)).sum::<f64>())
                .sum::<f64>()
                / n;
            (mean, if var > 0.0 { var.sqrt() } else { 1.0 })
        })
        .collect()
}

fn scale_channels(row: &[f64], s: &[(f64, f64)]) -> Vec<f64> {
    let len = row.len() / s.len();
    row.iter().enumerate().map(|(i, v)| (v - s[i / len].0) / s[i / len].1).collect()
}

fn fit_predict(cfg: &ExperimentConfig, fold: usize, x: &[Vec<f64>], y: &[Label], test: &[Vec<f64>]) -> Result<Vec<Label>> {
    let m = &cfg.model;
    let preds: Vec<Label> = match m.kind {
        ModelKind::Svm => {
            let model = svm_train(x, y, &m.svm)?;
            test.par_iter().map(|r| model.predict(r)).collect::<std::result::Result<_, _>>()?
        }
        ModelKind::Knn => {
            let model = knn_train(x, y, m.knn_k)?;
            test.par_iter().map(|r| model.predict(r)).collect::<std::result::Result<_, _>>()?
        }
        ModelKind::Rfc => {
            let fc = ForestConfig {
                rng_seed: fold_seed(cfg.rng_seed, seed_tag::MODEL, fold),
                ..m.forest.clone()
            };
            let model = rfc_train(x, y, &fc)?;
            test.par_iter().map(|r| model.predict(r)).collect::<std::result::Result<_, _>>()?
        }
        ModelKind::Cnn => {
            let mut tc = m.cnn_train.clone();
            tc.rng_seed = fold_seed(cfg.rng_seed, seed_tag::MODEL, fold);
            let (net, report) = cnn_train(x, y, &m.cnn, &tc, &m.focal)?;
            log::info!(
                "fold {fold}: cnn final train loss {:?}",
                report.train_loss.last()
            );
            test.par_iter().map(|r| net.predict(r)).collect::<std::result::Result<_, _>>()?
        }
    };
    Ok(preds)
}

fn run_fold(ds: &Dataset, fold: &Fold, cfg: &ExperimentConfig) -> Result<FoldResult> {
    let (train, test) = ds.split(fold);
    if test.is_empty() {
        return Err(EvalError::config("held-out patient has no windows"));
    }
    let train_labels: Vec<Label> = train.iter().map(|&i| ds.labels[i]).collect();
    let spec = BalanceSpec {
        ratio: cfg.features.ratio,
        rng_seed: fold_seed(cfg.rng_seed, seed_tag::BALANCE, fold.id),
    };
    let keep = balance_indices(&train_labels, &spec)?;
    let (x_train, x_test, fingerprint) = if cfg.model.kind == ModelKind::Cnn {
        let tr: Vec<&Vec<f64>> = train.iter().map(|&i| &ds.rows[i]).collect();
        let s = channel_scaler(&tr, cfg.model.cnn.in_channels);
        let mut h = std::collections::hash_map::DefaultHasher::new();
        std::hash::Hash::hash(&s.iter().flat_map(|(a, b)| [a.to_bits(), b.to_bits()]).collect::<Vec<u64>>(), &mut h);
        (
            keep.iter().map(|&k| scale_channels(tr[k], &s)).collect::<Vec<_>>(),
            test.iter().map(|&i| scale_channels(&ds.rows[i], &s)).collect::<Vec<_>>(),
            std::hash::Hasher::finish(&h),
        )
    } else {
        let params = fold_normalizer(ds, fold, cfg)?;
        let kept: Vec<Vec<f64>> = keep.iter().map(|&k| ds.rows[train[k]].clone()).collect();
        let held: Vec<Vec<f64>> = test.iter().map(|&i| ds.rows[i].clone()).collect();
        (
            apply_normalizer(&params, &kept)?,
            apply_normalizer(&params, &held)?,
            params.fingerprint(),
        )
    };
    let y_train: Vec<Label> = keep.iter().map(|&k| train_labels[k]).collect();
    let truth: Vec<Label> = test.iter().map(|&i| ds.labels[i]).collect();
    let predicted = fit_predict(cfg, fold.id, &x_train, &y_train, &x_test)?;
    let metrics = Metrics::from_predictions(&truth, &predicted);
    Ok(FoldResult {
        fold: fold.id,
        test_patient: fold.test.clone(),
        n_train: train.len(),
        n_train_balanced: keep.len(),
        n_test: test.len(),
        specificity_only: metrics.seizure.support == 0,
        normalizer: format!("{fingerprint:016x}"),
        metrics,
    })
}

/// Runs every fold of `ds` and aggregates. `cfg` should already be resolved.
pub fn evaluate_dataset(ds: &Dataset, cfg: &ExperimentConfig, command: &str) -> Result<ExperimentResult> {
    let plan = ds.plan()?;
    let mut folds = plan
        .folds
        .par_iter()
        .map(|f| {
            run_fold(ds, f, cfg).map_err(|e| EvalError::Fold {
                patient: f.test.clone(),
                source: Box::new(e),
            })
        })
        .collect::<Result<Vec<FoldResult>>>()?;
    folds.sort_by_key(|f| f.fold);
    let mut pooled = earpipe_models::Confusion::default();
    for f in &folds {
        pooled = pooled.merge(&f.metrics.confusion);
    }
    Ok(ExperimentResult {
        provenance: Provenance::new(command, cfg),
        model: cfg.model.kind.name().into(),
        n_rows: ds.rows.len(),
        macro_avg: MacroMetrics::of(&folds),
        micro: Metrics::from_confusion(pooled),
        folds,
    })
}

/// Loads every recording in `dir` (files and CSV directories) in name order.
pub fn load_recordings(dir: &Path) -> Result<Vec<Recording>> {
    let mut entries: Vec<_> = std::fs::read_dir(dir)
        .map_err(|e| EvalError::from(e).context(format!("listing {}", dir.display())))?
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .map(|e| e.path())
        .collect();
    entries.sort();
    entries
        .iter()
        .map(|p| load_recording(p).map_err(|e| EvalError::from(e).context(p.display().to_string())))
        .collect()
}

/// Raw recordings named by the config: a directory, or the synthetic corpus.
pub fn source_recordings(cfg: &ExperimentConfig) -> Result<Vec<Recording>> {
    match &cfg.paths.recordings {
        Some(dir) => load_recordings(dir),
        None => generate_corpus(&cfg.corpus),
    }
}

/// Separated recordings plus the templates used, ready for windowing.
pub struct Prepared {
    pub recordings: Vec<Recording>,
    pub template: Option<FrequencyTemplate<f64>>,
}

pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    let raw = source_recordings(cfg)?;
    let template = load_or_train_templates(cfg)?;
    let recordings = separate_all(&raw, &cfg.pipeline, template.as_ref())?;
    Ok(Prepared { recordings, template })
}

pub fn dataset(prepared: &Prepared, cfg: &ExperimentConfig) -> Result<Dataset> {
    if cfg.model.kind == ModelKind::Cnn {
        let e = epochs(&prepared.recordings, &cfg.features)?;
        Ok(Dataset::from_epochs(&e))
    } else {
        Ok(Dataset::from_table(&feature_table(&prepared.recordings, &cfg.features)?))
    }
}

/// Adjusts the CNN input shape to the recordings' window length.
fn fit_cnn_shape(cfg: &mut ExperimentConfig, prepared: &Prepared) {
    if let Some(r) = prepared.recordings.first() {
        let len = (earpipe_core::features::WINDOW_S * r.sample_rate).round() as usize;
        cfg.model.cnn = CnnConfig {
            in_channels: 6,
            in_len: len,
            ..cfg.model.cnn.clone()
        };
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    let mut cfg = cfg.resolved();
    cfg.validate()?;
    let prepared = prepare(&cfg)?;
    if cfg.model.kind == ModelKind::Cnn {
        fit_cnn_shape(&mut cfg, &prepared);
    }
    evaluate_dataset(&dataset(&prepared, &cfg)?, &cfg, "evaluate")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Stride,
    Ratio,
    Motion,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Stride => "stride",
            SweepAxis::Ratio => "ratio",
            SweepAxis::Motion => "motion",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: String,
    pub accuracy: f64,
    pub accuracy_micro: f64,
    pub seizure_detection_rate: f64,
    pub seizure_f1: f64,
    pub macro_f1: f64,
    pub n_rows: usize,
}

impl SweepRow {
    fn of(value: String, r: &ExperimentResult) -> SweepRow {
        SweepRow {
            value,
            accuracy: r.macro_avg.accuracy,
            accuracy_micro: r.micro.accuracy,
            seizure_detection_rate: r.macro_avg.seizure_detection_rate,
            seizure_f1: r.macro_avg.seizure_f1,
            macro_f1: r.macro_avg.macro_f1,
            n_rows: r.n_rows,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub provenance: Provenance,
    pub axis: SweepAxis,
    pub rows: Vec<SweepRow>,
    pub runs: Vec<ExperimentResult>,
}

/// One run per axis value with the master seed held fixed. Separation is
/// computed once per motion setting and shared across the stride and ratio points.
pub fn sweep(cfg: &ExperimentConfig, axis: SweepAxis) -> Result<SweepTable> {
    let mut base = cfg.resolved();
    base.validate()?;
    let mut rows = Vec::new();
    let mut runs = Vec::new();
    let mut run = |value: String, c: &ExperimentConfig, prepared: &Prepared| -> Result<()> {
        let r = evaluate_dataset(&dataset(prepared, c)?, c, "sweep")
            .map_err(|e| e.context(format!("{} = {value}", axis.name())))?;
        rows.push(SweepRow::of(value, &r));
        runs.push(r);
        Ok(())
    };
    match axis {
        SweepAxis::Stride | SweepAxis::Ratio => {
            let prepared = prepare(&base)?;
            if base.model.kind == ModelKind::Cnn {
                fit_cnn_shape(&mut base, &prepared);
            }
            if axis == SweepAxis::Stride {
                for s in 1..=9u32 {
                    let mut c = base.clone();
                    c.features.stride_s = s;
                    run(s.to_string(), &c, &prepared)?;
                }
            } else {
                for r in BalanceRatio::ALL {
                    let mut c = base.clone();
                    c.features.ratio = r;
                    run(r.to_string(), &c, &prepared)?;
                }
            }
        }
        SweepAxis::Motion => {
            for on in [false, true] {
                let mut c = base.clone();
                c.pipeline.motion_removal = on;
                let prepared = prepare(&c)?;
                if c.model.kind == ModelKind::Cnn {
                    fit_cnn_shape(&mut c, &prepared);
                }
                run(if on { "on" } else { "off" }.to_string(), &c, &prepared)?;
            }
        }
    }
    Ok(SweepTable {
        provenance: Provenance::new(&format!("sweep {}", axis.name()), &base),
        axis,
        rows,
        runs,
    })
}

pub fn write_sweep_csv(table: &SweepTable, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        table.axis.name(),
        "accuracy",
        "accuracy_micro",
        "seizure_detection_rate",
        "seizure_f1",
        "macro_f1",
        "n_rows",
    ])?;
    for r in &table.rows {
        w.write_record([
            r.value.clone(),
            r.accuracy.to_string(),
            r.accuracy_micro.to_string(),
            r.seizure_detection_rate.to_string(),
            r.seizure_f1.to_string(),
            r.macro_f1.to_string(),
            r.n_rows.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_folds_csv(result: &ExperimentResult, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([
        "fold", "test_patient", "n_train", "n_train_balanced", "n_test", "tp", "fp", "tn", "fn", "accuracy",
        "seizure_detection_rate", "non_seizure_rate", "seizure_f1", "specificity_only",
    ])?;
    for f in &result.folds {
        let m = &f.metrics;
        let c = &m.confusion;
        w.write_record([
            f.fold.to_string(),
            f.test_patient.clone(),
            f.n_train.to_string(),
            f.n_train_balanced.to_string(),
            f.n_test.to_string(),
            c.tp.to_string(),
            c.fp.to_string(),
            c.tn.to_string(),
            c.fn_.to_string(),
            m.accuracy.to_string(),
            m.seizure_detection_rate.to_string(),
            m.non_seizure_rate.to_string(),
            m.seizure.f1.to_string(),
            f.specificity_only.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
