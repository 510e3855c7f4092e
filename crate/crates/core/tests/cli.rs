use std::path::Path;
use std::process::{Command, Output};

fn coview(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coview"))
        .args(args)
        .env("COVIEW_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = coview(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SYNTH: &str = r#"{
  "num_known_classes": 3, "num_unknown_classes": 3, "per_class_count": 30,
  "dim_view1": 8, "dim_view2": 6, "noise_sigma": 0.4,
  "confusion_pairs_view1": [[3, 4]], "confusion_pairs_view2": [[4, 5]],
  "test_fraction": 0.2, "seed": 1
}"#;

const TRAIN: &str = r#"{"seed": 2, "K": 3, "hidden_dim": 16, "pretrain_epochs": 1, "train_epochs": 2, "lr": 0.001}"#;

struct Workspace {
    dir: tempfile::TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("s.json"), SYNTH).unwrap();
        std::fs::write(dir.path().join("t.json"), TRAIN).unwrap();
        let ws = Self { dir };
        ok(&["gen-synth", "--config", p(&ws.path("s.json")), "--out", p(&ws.path("data"))]);
        ws
    }

    fn path(&self, rel: &str) -> std::path::PathBuf {
        self.dir.path().join(rel)
    }
}

#[test]
fn generate_train_evaluate_pipeline() {
    let ws = Workspace::new();
    for f in ["meta.jsonl", "labels.json", "view_token.emb", "view_mask.emb"] {
        assert!(ws.path("data").join(f).is_file(), "{f}");
    }
    ok(&["train", "--config", p(&ws.path("t.json")), "--data", p(&ws.path("data")), "--out", p(&ws.path("run"))]);
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(ws.path("run/report.json")).unwrap()).unwrap();
    for key in ["accuracy", "bcubed_f1", "v_measure", "ari", "source", "seed", "config"] {
        assert!(report.get(key).is_some(), "report lacks {key}");
    }
    assert_eq!(report["config"]["K"], 3);
    let log = std::fs::read_to_string(ws.path("run/log.jsonl")).unwrap();
    assert_eq!(log.lines().count(), 2);
    assert!(ws.path("run/checkpoint/weights.bin").is_file());

    let printed = ok(&[
        "eval", "--config", p(&ws.path("t.json")), "--data", p(&ws.path("data")),
        "--checkpoint", p(&ws.path("run/checkpoint")), "--source", "unknown_head",
    ]);
    let again: serde_json::Value = serde_json::from_str(&printed).unwrap();
    assert_eq!(again["accuracy"], report["accuracy"]);

    ok(&["pretrain", "--config", p(&ws.path("t.json")), "--data", p(&ws.path("data")), "--out", p(&ws.path("pre"))]);
    assert_eq!(std::fs::read_to_string(ws.path("pre/pretrain.jsonl")).unwrap().lines().count(), 1);
    ok(&[
        "train", "--config", p(&ws.path("t.json")), "--data", p(&ws.path("data")),
        "--out", p(&ws.path("run2")), "--init", p(&ws.path("pre/checkpoint")),
    ]);
}

#[test]
fn same_seed_same_bytes() {
    let ws = Workspace::new();
    for out in ["a", "b"] {
        ok(&["--seed", "9", "train", "--config", p(&ws.path("t.json")), "--data", p(&ws.path("data")), "--out", p(&ws.path(out))]);
    }
    for f in ["report.json", "log.jsonl", "checkpoint/weights.bin", "checkpoint/manifest.json"] {
        assert_eq!(std::fs::read(ws.path("a").join(f)).unwrap(), std::fs::read(ws.path("b").join(f)).unwrap(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(ws.path("a/report.json")).unwrap()).unwrap();
    assert_eq!(report["seed"], 9);

    ok(&["gen-synth", "--config", p(&ws.path("s.json")), "--out", p(&ws.path("data2"))]);
    for f in ["meta.jsonl", "view_token.emb", "view_mask.emb"] {
        assert_eq!(std::fs::read(ws.path("data").join(f)).unwrap(), std::fs::read(ws.path("data2").join(f)).unwrap());
    }
}

#[test]
fn sweep_writes_one_report_per_k() {
    let ws = Workspace::new();
    let stdout = ok(&["sweep-k", "--config", p(&ws.path("t.json")), "--data", p(&ws.path("data")), "--k", "2,3,5", "--out", p(&ws.path("sweep"))]);
    assert_eq!(stdout.lines().count(), 3);
    for k in [2, 3, 5] {
        let r: serde_json::Value = serde_json::from_slice(&std::fs::read(ws.path(&format!("sweep/k{k}/report.json"))).unwrap()).unwrap();
        assert_eq!(r["config"]["K"], k);
    }
    let table: Vec<serde_json::Value> = serde_json::from_slice(&std::fs::read(ws.path("sweep/sweep.json")).unwrap()).unwrap();
    assert_eq!(table.len(), 3);
}

#[test]
fn probe_prints_a_per_type_table() {
    let ws = Workspace::new();
    let out = ok(&["probe-knn", "--data", p(&ws.path("data")), "--view", "mask", "--k", "5", "--out", p(&ws.path("probe.json"))]);
    let lines: Vec<&str> = out.lines().collect();
    assert!(lines[0].starts_with("Type"));
    assert!(lines[0].trim_end().ends_with("mask"));
    assert!(lines.last().unwrap().starts_with("Avg"));
    // header, six types, average
    assert_eq!(lines.len(), 8);
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(ws.path("probe.json")).unwrap()).unwrap();
    assert_eq!(json["per_type"].as_array().unwrap().len(), 6);
}

#[test]
fn split_redraws_the_held_out_set() {
    let ws = Workspace::new();
    ok(&["--seed", "4", "split", "--data", p(&ws.path("data")), "--fraction", "0.5", "--out", p(&ws.path("half"))]);
    let meta = std::fs::read_to_string(ws.path("half/meta.jsonl")).unwrap();
    let test = meta.lines().filter(|l| l.contains(r#""split":"test""#)).count();
    assert_eq!(test, 90);
}

fn error_line(out: &Output) -> serde_json::Value {
    let stderr = String::from_utf8_lossy(&out.stderr);
    let line = stderr.lines().last().unwrap_or_default();
    serde_json::from_str(line).unwrap_or_else(|e| panic!("not a JSON error line ({e}): {stderr}"))
}

#[test]
fn failures_exit_nonzero_with_a_json_line() {
    let ws = Workspace::new();
    let missing = coview(&["train", "--config", p(&ws.path("nope.json")), "--data", p(&ws.path("data")), "--out", p(&ws.path("x"))]);
    assert!(!missing.status.success());
    assert_eq!(error_line(&missing)["error"], "io");

    std::fs::write(ws.path("bad.json"), r#"{"K": 3, "learning_rate": 1.0}"#).unwrap();
    let schema = coview(&["train", "--config", p(&ws.path("bad.json")), "--data", p(&ws.path("data")), "--out", p(&ws.path("x"))]);
    assert!(!schema.status.success());
    assert_eq!(error_line(&schema)["error"], "config");

    let flag = coview(&["train", "--bogus"]);
    assert_eq!(flag.status.code(), Some(2));
    assert_eq!(error_line(&flag)["error"], "usage");

    let none = coview(&[]);
    assert!(!none.status.success());
    assert_eq!(error_line(&none)["error"], "usage");
}
