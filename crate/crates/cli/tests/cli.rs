use std::path::Path;
use std::process::{Command, Output};

fn earpipe(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_earpipe"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn json_out(o: &Output) -> serde_json::Value {
    assert!(o.status.success(), "stderr: {}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn json_err(o: &Output) -> serde_json::Value {
    assert!(!o.status.success());
    serde_json::from_slice(&o.stderr).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&o.stderr)))
}

const SMALL: &str = r#"{"rng_seed": 3, "corpus": {"patients": 2, "duration_s": 120, "seizure_s": [20, 30], "motion_bursts": 1, "chew_bursts": 1}}"#;

#[test]
fn help_and_version_succeed() {
    let d = tempfile::tempdir().unwrap();
    assert!(earpipe(d.path(), &["--help"]).status.success());
    let v = earpipe(d.path(), &["--version"]);
    assert!(v.status.success());
    assert!(String::from_utf8_lossy(&v.stdout).starts_with("earpipe "));
}

#[test]
fn usage_errors_are_json_with_exit_two() {
    let d = tempfile::tempdir().unwrap();
    let o = earpipe(d.path(), &["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json_err(&o)["error"]["kind"], "usage");
    let o = earpipe(d.path(), &["evaluate", "--ratio", "2:1"]);
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(json_err(&o)["error"]["kind"], "usage");
}

#[test]
fn bad_config_reports_kind_and_position() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("c.json"), "{\n  \"model\": {\"kind\": \"tree\"}\n}").unwrap();
    let o = earpipe(d.path(), &["evaluate", "--config", "c.json"]);
    assert_eq!(o.status.code(), Some(1));
    let e = json_err(&o);
    assert_eq!(e["error"]["kind"], "config");
    assert!(e["error"]["message"].as_str().unwrap().contains("line 2"));

    let o = earpipe(d.path(), &["evaluate", "--config", "missing.json"]);
    assert_eq!(json_err(&o)["error"]["kind"], "io");

    std::fs::write(d.path().join("s.json"), r#"{"features": {"stride_s": 12}}"#).unwrap();
    let o = earpipe(d.path(), &["evaluate", "--config", "s.json"]);
    assert_eq!(json_err(&o)["error"]["kind"], "invalid_parameter");
}

#[test]
fn flags_override_the_config_file() {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("c.json"), SMALL).unwrap();
    let o = earpipe(d.path(), &["synth", "--config", "c.json", "--seed", "9", "--out", "corpus", "--patients", "3"]);
    let v = json_out(&o);
    assert_eq!(v["provenance"]["rng_seed"], 9);
    assert_eq!(v["provenance"]["config"]["corpus"]["patients"], 3);
    assert_eq!(v["recordings"].as_array().unwrap().len(), 3);
    assert!(d.path().join("corpus/p03.rec").exists());
}

#[test]
fn stage_by_stage_pipeline() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    std::fs::write(p.join("c.json"), SMALL).unwrap();
    let c = ["--config", "c.json"];
    let run = |args: &[&str]| json_out(&earpipe(p, &[args, &c[..]].concat()));

    run(&["synth", "--out", "corpus"]);
    let v = run(&["preprocess", "--in", "corpus/p01.rec", "--out", "pre.rec", "--mains", "50", "--bandpass", "1,40"]);
    assert_eq!(v["provenance"]["config"]["pipeline"]["preprocess"]["mains_hz"], 50.0);
    let v = run(&["denoise", "--in", "pre.rec", "--out", "den.rec", "--k", "6", "--report", "modes.csv"]);
    assert!(v["modes"].as_u64().unwrap() > 0);
    let modes = std::fs::read_to_string(p.join("modes.csv")).unwrap();
    assert!(modes.starts_with("channel,block,start_s,end_s,mode,center_hz,r,excluded"));
    assert_eq!(modes.lines().count() as u64, v["modes"].as_u64().unwrap() + 1);

    run(&["separate", "--in", "den.rec", "--out", "emd.rec", "--method", "emd"]);
    run(&["train-templates", "--out", "w.tpl"]);
    let v = run(&["separate", "--in", "den.rec", "--out", "nnmf.rec", "--templates", "w.tpl"]);
    assert_eq!(v["method"], "nnmf");

    run(&["separate", "--in", "corpus/p02.rec", "--out", "p02.rec", "--templates", "w.tpl"]);
    let v = run(&["features", "--in", "nnmf.rec", "p02.rec", "--out", "f.csv", "--stride", "5"]);
    assert_eq!(v["dim"], 348);
    assert_eq!(v["rows"], 2 * ((120 - 10) / 5 + 1));

    for model in ["svm", "knn", "rfc"] {
        let out = format!("{model}.bin");
        let v = run(&["train", "--features", "f.csv", "--model", model, "--out", &out]);
        assert_eq!(v["model"], model);
        assert!(p.join(&out).exists());
        assert!(p.join(format!("{out}.norm.json")).exists());
    }

    let v = run(&["snr", "--in", "pre.rec", "--reconstructed", "den.rec", "--band", "8,12", "--band", "0.5,4"]);
    assert_eq!(v["comparisons"].as_array().unwrap().len(), 2);
    let v = run(&["snr", "--in", "nnmf.rec", "--channel", "eeg_left"]);
    assert_eq!(v["reports"][0]["epoch_db"].as_array().unwrap().len(), 12);
}

#[test]
fn separate_needs_mixed_channels() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    std::fs::write(p.join("c.json"), SMALL).unwrap();
    json_out(&earpipe(p, &["synth", "--config", "c.json", "--out", "corpus"]));
    json_out(&earpipe(p, &["separate", "--config", "c.json", "--in", "corpus/p01.rec", "--out", "s.rec", "--method", "emd"]));
    let o = earpipe(p, &["separate", "--config", "c.json", "--in", "s.rec", "--out", "t.rec", "--method", "emd"]);
    assert_eq!(json_err(&o)["error"]["kind"], "usage");
    let o = earpipe(p, &["features", "--config", "c.json", "--in", "corpus/p01.rec", "--out", "f.csv"]);
    assert_eq!(json_err(&o)["error"]["kind"], "usage");
}

#[test]
fn evaluate_writes_metrics_and_fold_table() {
    let d = tempfile::tempdir().unwrap();
    let p = d.path();
    std::fs::write(p.join("c.json"), SMALL).unwrap();
    let o = earpipe(
        p,
        &["evaluate", "--config", "c.json", "--motion", "off", "--metrics", "m.json", "--folds-csv", "folds.csv"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    let v: serde_json::Value = serde_json::from_slice(&std::fs::read(p.join("m.json")).unwrap()).unwrap();
    assert_eq!(v["folds"].as_array().unwrap().len(), 2);
    assert_eq!(v["provenance"]["config"]["pipeline"]["motion_removal"], false);
    let folds = std::fs::read_to_string(p.join("folds.csv")).unwrap();
    assert_eq!(folds.lines().count(), 3);
}
