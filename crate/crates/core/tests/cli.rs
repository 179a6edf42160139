use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn fingait(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fingait"))
        .args(args)
        .env_remove("FIN_GAIT_DATA_DIR")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

fn sha_of(list: &Value, suffix: &str) -> String {
    list.as_array()
        .unwrap()
        .iter()
        .find(|a| a["path"].as_str().unwrap().ends_with(suffix))
        .unwrap_or_else(|| panic!("no artifact ending in {suffix}"))["sha256"]
        .as_str()
        .unwrap()
        .to_string()
}

#[test]
fn help_exits_zero() {
    let o = fingait(&["--help"]);
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in ["datagen", "train", "evaluate", "interpolate", "bench", "fom-sweep", "search", "simulate", "sweep", "tradeoff"] {
        assert!(text.contains(sub), "help lacks {sub}");
    }
}

#[test]
fn missing_data_flag_is_a_usage_error() {
    let o = fingait(&["train", "--model", "linear", "--target", "thrust"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--data"));
}

#[test]
fn unknown_flag_gets_a_suggestion() {
    let o = fingait(&["datagen", "--materail", "rigid"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("--material"), "{}", stderr(&o));
}

#[test]
fn unreadable_dataset_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.csv");
    let o = fingait(&["train", "--model", "linear", "--target", "thrust", "--data", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert_eq!(stderr(&o).lines().count(), 1);
}

#[test]
fn config_file_supplies_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("c.csv");
    std::fs::write(&cfg, format!("material = pdms-1:20\nout = {}\nvary = stroke,frequency\nfix = pitch=30,spo=0\n", out.display())).unwrap();
    let o = fingait(&["fom-sweep", "--config", cfg.to_str().unwrap(), "--vary", "pitch,stroke", "--fix", "f=1,spo=0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let m = manifest(&dir.path().join("c.csv.manifest.json"));
    assert_eq!(m["config"]["vary"], "pitch,stroke");
    assert_eq!(m["config"]["models"]["material"], "PDMS_1_20");
}

#[test]
fn pipeline_manifests_chain_checksums() {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).to_string_lossy().into_owned();
    let data = p("data.csv");
    let o = fingait(&["datagen", "--material", "pdms-1:10", "--seed", "2", "--out", &data, "--traces-dir", &p("traces")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let model = p("seq.model");
    let o = fingait(&["train", "--model", "seq", "--target", "thrust", "--data", &data, "--epochs", "2", "--out", &model]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(report["epochs_run"], 2);

    let sim = p("sim");
    let o = fingait(&[
        "simulate", "--thrust-model", &model, "--power-model", &model, "--requests", "20", "--weights", "0.8,0,0.2",
        "--out-dir", &sim,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let gen = manifest(Path::new(&format!("{data}.manifest.json")));
    let train = manifest(Path::new(&format!("{model}.manifest.json")));
    let run = manifest(&dir.path().join("sim/manifest.json"));
    assert_eq!(sha_of(&gen["outputs"], "data.csv"), sha_of(&train["inputs"], "data.csv"));
    assert_eq!(sha_of(&gen["outputs"], "traces"), sha_of(&train["inputs"], "traces"));
    assert_eq!(sha_of(&train["outputs"], "seq.model"), sha_of(&run["inputs"], "seq.model"));

    let records = std::fs::read_to_string(dir.path().join("sim/records.csv")).unwrap();
    assert_eq!(records.lines().count(), 21);
    let summary: Value = serde_json::from_slice(&std::fs::read(dir.path().join("sim/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["summary"]["summarized"], 10);
}

#[test]
fn search_prints_a_result() {
    let o = fingait(&[
        "search", "--oracle", "--material", "rigid", "--target", "-0.2", "--weights", "0.8,0,0.2", "--algo", "hjps",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let r: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(r["algorithm"], "hjps");
    let sum = 0.8 * r["loss_t"].as_f64().unwrap() + 0.2 * r["loss_p"].as_f64().unwrap();
    assert!((r["loss_total"].as_f64().unwrap() - sum).abs() < 1e-9);
}
