use std::path::{Path, PathBuf};

use earpipe_core::features::{
    apply_normalizer, balance_indices, feature_vector, fit_normalizer, read_feature_csv, segment, write_feature_csv,
    BalanceSpec, FeatureRow, FeatureTable, NormalizationMode,
};
use earpipe_core::motion::denoise_channel;
use earpipe_core::nnmf::{save_templates, train_templates, TemplateSources};
use earpipe_core::preprocess::preprocess_channel;
use earpipe_core::signals::{load_recording, save_recording, Band, ChannelRole, Encoding, Modality, Recording};
use earpipe_eval::config::{fold_seed, seed_tag, ModelKind, SeparationMethod};
use earpipe_eval::corpus::{generate_corpus, template_sources};
use earpipe_eval::experiment::{write_folds_csv, write_sweep_csv, Provenance};
use earpipe_eval::pipeline::{load_or_train_templates, separate_channel};
use earpipe_eval::{compare_snr, run_experiment, sweep, ExperimentConfig, SweepAxis};
use earpipe_models::cnn::{cnn_train, CnnConfig};
use earpipe_models::file::{save_model, Model};
use earpipe_models::forest::rfc_train;
use earpipe_models::knn::knn_train;
use earpipe_models::svm::svm_train;
use earpipe_models::{Label, Metrics};
use serde::Serialize;
use serde_json::json;

use crate::args::{AxisArg, Cli, Command, EncodingArg, Global, MethodArg, ModelArg, NormArg, Switch};
use crate::error::{CliError, Result};

pub fn run(cli: Cli) -> Result<()> {
    let cfg = resolve_config(&cli.global)?;
    let out = cli.global.metrics.clone();
    let report = match cli.command {
        Command::Synth { out, duration, encoding } => synth(cfg, &out, duration, encoding)?,
        Command::Preprocess {
            input,
            out,
            mains,
            bandpass,
        } => preprocess(cfg, &input, &out, mains, bandpass.as_deref())?,
        Command::Denoise {
            input,
            out,
            k,
            alpha,
            corr_threshold,
            report,
        } => denoise(cfg, &input, &out, k, alpha, corr_threshold, report.as_deref())?,
        Command::Separate { input, out, method } => separate(cfg, &input, &out, method)?,
        Command::TrainTemplates { eeg, eog, emg, out } => train_tpl(cfg, eeg, eog, emg, &out)?,
        Command::Features { input, out } => features(cfg, &input, &out)?,
        Command::Train { features, input, out } => train(cfg, features.as_deref(), &input, &out)?,
        Command::Evaluate { folds_csv } => {
            let r = run_experiment(&cfg)?;
            if let Some(p) = folds_csv {
                write_folds_csv(&r, &p)?;
            }
            serde_json::to_value(&r)?
        }
        Command::Sweep { axis, csv } => {
            let axis = match axis {
                AxisArg::Stride => SweepAxis::Stride,
                AxisArg::Ratio => SweepAxis::Ratio,
                AxisArg::Motion => SweepAxis::Motion,
            };
            let t = sweep(&cfg, axis)?;
            if let Some(p) = csv {
                write_sweep_csv(&t, &p)?;
            }
            serde_json::to_value(&t)?
        }
        Command::Snr {
            input,
            reconstructed,
            channel,
            bands,
        } => snr(cfg, &input, reconstructed.as_deref(), channel.as_deref(), &bands)?,
    };
    emit(&report, out.as_deref())
}

/// Config file, then flag overrides, then seed resolution.
pub fn resolve_config(g: &Global) -> Result<ExperimentConfig> {
    let mut cfg = match &g.config {
        Some(p) => ExperimentConfig::from_file(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = g.seed {
        cfg.rng_seed = s;
    }
    if let Some(n) = g.patients {
        cfg.corpus.patients = n;
    }
    if let Some(s) = g.stride {
        cfg.features.stride_s = s;
    }
    if let Some(r) = &g.ratio {
        cfg.features.ratio = r.parse().map_err(|e: earpipe_core::CoreError| CliError::usage(e.to_string()))?;
    }
    if let Some(m) = g.model {
        cfg.model.kind = match m {
            ModelArg::Svm => ModelKind::Svm,
            ModelArg::Knn => ModelKind::Knn,
            ModelArg::Rfc => ModelKind::Rfc,
            ModelArg::Cnn => ModelKind::Cnn,
        };
    }
    if let Some(m) = g.separation {
        cfg.pipeline.separation = method(m);
    }
    if let Some(s) = g.motion {
        cfg.pipeline.motion_removal = s == Switch::On;
    }
    if let Some(n) = g.normalization {
        cfg.features.normalization = match n {
            NormArg::ZScore => NormalizationMode::ZScore,
            NormArg::MinMax => NormalizationMode::MinMax,
        };
    }
    if let Some(s) = g.bandpass_baseline {
        cfg.pipeline.bandpass_baseline = s == Switch::On;
    }
    if g.recordings.is_some() {
        cfg.paths.recordings = g.recordings.clone();
    }
    if g.templates.is_some() {
        cfg.paths.templates = g.templates.clone();
    }
    if g.metrics.is_some() {
        cfg.paths.output = g.metrics.clone();
    }
    let cfg = cfg.resolved();
    cfg.validate()?;
    Ok(cfg)
}

fn method(m: MethodArg) -> SeparationMethod {
    match m {
        MethodArg::Emd => SeparationMethod::Emd,
        MethodArg::Nnmf => SeparationMethod::Nnmf,
    }
}

fn emit(value: &serde_json::Value, path: Option<&Path>) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::io(format!("writing {}", p.display()), e)),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn report(command: &str, cfg: &ExperimentConfig, body: impl Serialize) -> Result<serde_json::Value> {
    let mut v = serde_json::to_value(body)?;
    if let serde_json::Value::Object(m) = &mut v {
        m.insert("provenance".into(), serde_json::to_value(Provenance::new(command, cfg))?);
    }
    Ok(v)
}

fn load(path: &Path) -> Result<Recording> {
    load_recording(path).map_err(|e| CliError::from(e).with_context(format!("reading {}", path.display())))
}

fn save(rec: &Recording, path: &Path) -> Result<()> {
    save_recording(rec, path, encoding_for(path))
        .map_err(|e| CliError::from(e).with_context(format!("writing {}", path.display())))
}

/// A path ending in `.csv` or `/` is written as a CSV directory.
fn encoding_for(path: &Path) -> Encoding {
    let s = path.to_string_lossy();
    if s.ends_with('/') || path.extension().is_some_and(|e| e == "csv") {
        Encoding::Csv
    } else {
        Encoding::F64le
    }
}

fn mixed(rec: &Recording) -> Vec<ChannelRole> {
    rec.channels
        .iter()
        .map(|(r, _)| *r)
        .filter(|r| ChannelRole::MIXED.contains(r))
        .collect()
}

fn synth(cfg: ExperimentConfig, out: &Path, duration: Option<f64>, encoding: EncodingArg) -> Result<serde_json::Value> {
    let mut corpus = cfg.corpus.clone();
    if let Some(d) = duration {
        corpus.duration_s = d;
    }
    corpus.validate()?;
    let recs = generate_corpus(&corpus)?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(format!("creating {}", out.display()), e))?;
    let (enc, ext) = match encoding {
        EncodingArg::Csv => (Encoding::Csv, "csv"),
        EncodingArg::F64le => (Encoding::F64le, "rec"),
    };
    let mut files = Vec::new();
    for r in &recs {
        let name = format!("{}.{ext}", r.patient_id);
        save_recording(r, out.join(&name), enc)?;
        files.push(json!({
            "file": name,
            "patient_id": r.patient_id,
            "duration_s": r.duration(),
            "seizures": r.annotations.iter().map(|a| [a.onset, a.offset]).collect::<Vec<_>>(),
        }));
    }
    let mut c = cfg;
    c.corpus = corpus;
    report("synth", &c, json!({ "recordings": files }))
}

fn preprocess(
    mut cfg: ExperimentConfig,
    input: &Path,
    out: &Path,
    mains: Option<f64>,
    bandpass: Option<&str>,
) -> Result<serde_json::Value> {
    if let Some(m) = mains {
        cfg.pipeline.preprocess.mains_hz = m;
    }
    if let Some(b) = bandpass {
        let band = parse_band(b)?;
        cfg.pipeline.preprocess.bandpass = Some((band.lo, band.hi));
    }
    let rec = load(input)?;
    let p = cfg.pipeline.effective_preprocess();
    p.validate(rec.sample_rate)?;
    let mut channels = Vec::new();
    for (role, x) in &rec.channels {
        channels.push((*role, preprocess_channel(x, rec.sample_rate, &p)?));
    }
    save(&rec.with_channels(channels)?, out)?;
    report(
        "preprocess",
        &cfg,
        json!({ "input": input, "output": out, "channels": rec.channels.len(), "samples": rec.len() }),
    )
}

#[allow(clippy::too_many_arguments)]
fn denoise(
    mut cfg: ExperimentConfig,
    input: &Path,
    out: &Path,
    k: Option<usize>,
    alpha: Option<f64>,
    corr_threshold: Option<f64>,
    csv_path: Option<&Path>,
) -> Result<serde_json::Value> {
    let d = &mut cfg.pipeline.denoise;
    if let Some(k) = k {
        d.vmd.k_modes = k;
    }
    if let Some(a) = alpha {
        d.vmd.alpha = a;
    }
    if let Some(t) = corr_threshold {
        d.corr_threshold = t;
    }
    d.vmd.validate()?;
    let rec = load(input)?;
    let roles = mixed(&rec);
    if roles.is_empty() {
        return Err(CliError::usage(format!("{} has no mixed channels", input.display())));
    }
    let mut channels = rec.channels.clone();
    let mut rows = Vec::new();
    let mut excluded = 0usize;
    for (role, x) in channels.iter_mut().filter(|(r, _)| roles.contains(r)) {
        let o = denoise_channel(x, rec.sample_rate, &rec.imu, 0.0, &cfg.pipeline.denoise)?;
        for (b, blk) in o.blocks.iter().enumerate() {
            for m in 0..blk.center_freqs.len() {
                excluded += blk.excluded[m] as usize;
                rows.push((role.name(), b, blk.start_s, blk.end_s, m, blk.center_freqs[m], blk.r[m], blk.excluded[m]));
            }
        }
        *x = o.signal;
    }
    save(&rec.with_channels(channels)?, out)?;
    if let Some(p) = csv_path {
        let mut w = csv::Writer::from_path(p)?;
        w.write_record(["channel", "block", "start_s", "end_s", "mode", "center_hz", "r", "excluded"])?;
        for r in &rows {
            w.write_record([
                r.0.to_string(),
                r.1.to_string(),
                r.2.to_string(),
                r.3.to_string(),
                r.4.to_string(),
                r.5.to_string(),
                r.6.to_string(),
                r.7.to_string(),
            ])?;
        }
        w.flush().map_err(|e| CliError::io(format!("writing {}", p.display()), e))?;
    }
    report(
        "denoise",
        &cfg,
        json!({ "input": input, "output": out, "modes": rows.len(), "excluded_modes": excluded }),
    )
}

fn separate(mut cfg: ExperimentConfig, input: &Path, out: &Path, m: Option<MethodArg>) -> Result<serde_json::Value> {
    if let Some(m) = m {
        cfg.pipeline.separation = method(m);
    }
    let rec = load(input)?;
    let template = load_or_train_templates(&cfg)?;
    let mut channels = Vec::new();
    for role in ChannelRole::MIXED {
        let x = rec
            .channel(role)
            .ok_or_else(|| CliError::usage(format!("{} lacks channel {}", input.display(), role.name())))?;
        let side = role.side().expect("mixed roles have a side");
        let parts = separate_channel(x, rec.sample_rate, &cfg.pipeline, template.as_ref())?;
        for (m, s) in Modality::ALL.into_iter().zip(parts) {
            channels.push((m.role(side), s));
        }
    }
    channels.sort_by_key(|(r, _)| ChannelRole::SEPARATED.iter().position(|x| x == r));
    save(&rec.with_channels(channels)?, out)?;
    report(
        "separate",
        &cfg,
        json!({ "input": input, "output": out, "method": cfg.pipeline.separation }),
    )
}

fn train_tpl(
    cfg: ExperimentConfig,
    eeg: Option<PathBuf>,
    eog: Option<PathBuf>,
    emg: Option<PathBuf>,
    out: &Path,
) -> Result<serde_json::Value> {
    let (sources, rate, origin) = match (eeg, eog, emg) {
        (Some(a), Some(b), Some(c)) => {
            let recs = [load(&a)?, load(&b)?, load(&c)?];
            let rate = recs[0].sample_rate;
            if recs.iter().any(|r| r.sample_rate != rate) {
                return Err(CliError::usage("template sources differ in sample rate"));
            }
            let all = |r: &Recording| r.channels.iter().map(|(_, x)| x.clone()).collect::<Vec<_>>();
            let s = TemplateSources {
                eeg: all(&recs[0]),
                eog: all(&recs[1]),
                emg: all(&recs[2]),
            };
            (s, rate, json!({ "eeg": a, "eog": b, "emg": c }))
        }
        _ => {
            let seed = earpipe_eval::config::derive_seed(cfg.rng_seed, seed_tag::TEMPLATE_DONOR);
            let s = template_sources(&cfg.corpus, seed)?;
            (s, earpipe_core::signals::DEFAULT_SAMPLE_RATE, json!("synthetic donor"))
        }
    };
    let t = train_templates(&sources, rate, &cfg.pipeline.stft, &cfg.pipeline.nnmf)?;
    save_templates(&t, out).map_err(|e| CliError::from(e).with_context(format!("writing {}", out.display())))?;
    let blocks: Vec<_> = t
        .blocks
        .iter()
        .map(|b| json!({ "modality": b.modality.name(), "start": b.start, "end": b.end }))
        .collect();
    report(
        "train-templates",
        &cfg,
        json!({ "sources": origin, "output": out, "bins": t.bins(), "blocks": blocks }),
    )
}

fn load_separated(inputs: &[PathBuf]) -> Result<Vec<Recording>> {
    let mut recs = Vec::new();
    for p in inputs {
        if p.is_dir() && !p.join("header.json").exists() {
            recs.extend(earpipe_eval::experiment::load_recordings(p)?);
        } else {
            recs.push(load(p)?);
        }
    }
    Ok(recs)
}

fn features(cfg: ExperimentConfig, inputs: &[PathBuf], out: &Path) -> Result<serde_json::Value> {
    let recs = load_separated(inputs)?;
    let spec = cfg.features.window()?;
    let mut rows = Vec::new();
    for r in &recs {
        if !r.is_separated() {
            return Err(CliError::usage(format!("{} is not a separated recording", r.patient_id)));
        }
        for e in segment(r, &spec)? {
            rows.push(FeatureRow {
                values: feature_vector(&e, &cfg.features.mfcc)?.values,
                label: e.label,
                patient_id: e.patient_id.clone(),
                start_s: e.start_s,
            });
        }
    }
    let table = FeatureTable {
        names: earpipe_core::features::feature_names(),
        rows,
    };
    write_feature_csv(&table, out)?;
    let seizure = table.rows.iter().filter(|r| r.label == Label::Seizure).count();
    report(
        "features",
        &cfg,
        json!({
            "output": out,
            "rows": table.rows.len(),
            "seizure_rows": seizure,
            "dim": table.dim(),
        }),
    )
}

fn train(cfg: ExperimentConfig, features: Option<&Path>, inputs: &[PathBuf], out: &Path) -> Result<serde_json::Value> {
    let (rows, labels) = if cfg.model.kind == ModelKind::Cnn {
        if inputs.is_empty() {
            return Err(CliError::usage("the cnn trains on raw windows; pass separated recordings with --in"));
        }
        let spec = cfg.features.window()?;
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for r in load_separated(inputs)? {
            for e in segment(&r, &spec)? {
                rows.push(e.channels.concat());
                labels.push(e.label);
            }
        }
        (rows, labels)
    } else {
        let path = features.ok_or_else(|| CliError::usage("--features is required"))?;
        let t = read_feature_csv(path)?;
        (t.matrix(), t.labels())
    };
    let spec = BalanceSpec {
        ratio: cfg.features.ratio,
        rng_seed: fold_seed(cfg.rng_seed, seed_tag::BALANCE, 0),
    };
    let keep = balance_indices(&labels, &spec)?;
    let y: Vec<Label> = keep.iter().map(|&i| labels[i]).collect();
    let m = &cfg.model;
    let mut extra = json!({});
    let (model, x) = if m.kind == ModelKind::Cnn {
        let cnn = CnnConfig {
            in_channels: 6,
            in_len: rows[0].len() / 6,
            ..m.cnn.clone()
        };
        let x: Vec<Vec<f64>> = keep.iter().map(|&i| rows[i].clone()).collect();
        let (net, rep) = cnn_train(&x, &y, &cnn, &m.cnn_train, &m.focal)?;
        extra = json!({ "final_train_loss": rep.train_loss.last(), "test": rep.test });
        (Model::Cnn(net), x)
    } else {
        let params = fit_normalizer(&rows, cfg.features.normalization, "train")?;
        let x = apply_normalizer(&params, &keep.iter().map(|&i| rows[i].clone()).collect::<Vec<_>>())?;
        let norm_path = sidecar(out);
        std::fs::write(&norm_path, serde_json::to_string_pretty(&params)? + "\n")
            .map_err(|e| CliError::io(format!("writing {}", norm_path.display()), e))?;
        extra["normalizer"] = json!(norm_path);
        let model = match m.kind {
            ModelKind::Svm => Model::Svm(svm_train(&x, &y, &m.svm)?),
            ModelKind::Knn => Model::Knn(knn_train(&x, &y, m.knn_k)?),
            _ => Model::Forest(rfc_train(&x, &y, &m.forest)?),
        };
        (model, x)
    };
    save_model(&model, out)?;
    let predicted = x
        .iter()
        .map(|r| match &model {
            Model::Svm(s) => s.predict(r),
            Model::Knn(k) => k.predict(r),
            Model::Forest(f) => f.predict(r),
            Model::Cnn(c) => c.predict(r),
        })
        .collect::<std::result::Result<Vec<_>, _>>()?;
    report(
        "train",
        &cfg,
        json!({
            "model": model.kind(),
            "output": out,
            "rows": rows.len(),
            "rows_balanced": keep.len(),
            "train_metrics": Metrics::from_predictions(&y, &predicted),
            "details": extra,
        }),
    )
}

/// Normalizer written next to a trained model.
fn sidecar(model: &Path) -> PathBuf {
    let mut s = model.as_os_str().to_owned();
    s.push(".norm.json");
    PathBuf::from(s)
}

fn parse_band(s: &str) -> Result<Band> {
    let bad = || CliError::usage(format!("band must look like LO,HI (got {s:?})"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    let lo: f64 = a.trim().parse().map_err(|_| bad())?;
    let hi: f64 = b.trim().parse().map_err(|_| bad())?;
    Ok(Band::new(lo, hi))
}

fn pick_channel<'a>(rec: &'a Recording, name: Option<&str>) -> Result<(&'a str, &'a [f64])> {
    match name {
        Some(n) => {
            let role = ChannelRole::from_name(n)
                .or_else(|| ChannelRole::SEPARATED.into_iter().chain(ChannelRole::MIXED).find(|r| r.snake() == n))
                .ok_or_else(|| CliError::usage(format!("unknown channel {n:?}")))?;
            let x = rec
                .channel(role)
                .ok_or_else(|| CliError::usage(format!("{} has no channel {n}", rec.patient_id)))?;
            Ok((role.name(), x))
        }
        None => rec
            .channels
            .first()
            .map(|(r, x)| (r.name(), x.as_slice()))
            .ok_or_else(|| CliError::usage("recording has no channels")),
    }
}

fn snr(
    cfg: ExperimentConfig,
    input: &Path,
    reconstructed: Option<&Path>,
    channel: Option<&str>,
    bands: &[String],
) -> Result<serde_json::Value> {
    let bands: Vec<Band> = if bands.is_empty() {
        vec![Modality::Eeg.band()]
    } else {
        bands.iter().map(|b| parse_band(b)).collect::<Result<_>>()?
    };
    let raw = load(input)?;
    let (name, x) = pick_channel(&raw, channel)?;
    let body = match reconstructed {
        Some(p) => {
            let rec = load(p)?;
            let (_, y) = pick_channel(&rec, Some(name))?;
            json!({ "channel": name, "comparisons": compare_snr(x, y, &bands, raw.sample_rate)? })
        }
        None => {
            let reports = bands
                .iter()
                .map(|b| earpipe_eval::snr::snr_report(x, *b, raw.sample_rate))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            json!({ "channel": name, "reports": reports })
        }
    };
    report("snr", &cfg, body)
}
