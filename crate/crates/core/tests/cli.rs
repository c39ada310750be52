use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMALL: &str = r#"
[encoder]
dim = 16

[train]
epochs = 3

[synth.counts]
normal = 12
seo = 8
epo = 6
soo = 6
"#;

fn prgc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_prgc"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> Output {
    let out = prgc(args);
    assert!(
        out.status.success(),
        "prgc {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

struct Scratch {
    dir: TempDir,
}

impl Scratch {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("small.toml"), SMALL).unwrap();
        Scratch { dir }
    }

    fn path(&self, name: &str) -> String {
        self.dir.path().join(name).to_string_lossy().into_owned()
    }

    fn generate(&self, name: &str, seed: &str) -> String {
        let out = self.path(name);
        ok(&[
            "generate",
            "--config",
            &self.path("small.toml"),
            "--seed",
            seed,
            "--out",
            &out,
        ]);
        out
    }

    fn train(&self, data: &str, out: &str, extra: &[&str]) -> PathBuf {
        let out = self.path(out);
        let config = self.path("small.toml");
        let mut args = vec!["train", "--config", &config, "--train", data, "--out", &out];
        args.extend_from_slice(extra);
        ok(&args);
        PathBuf::from(out)
    }
}

fn count_triples(pred: &Path) -> usize {
    fs::read_to_string(pred)
        .unwrap()
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            v["spans"].as_array().unwrap().len()
        })
        .sum()
}

#[test]
fn generate_is_deterministic() {
    let s = Scratch::new();
    let a = s.generate("a.json", "7");
    let b = s.generate("b.json", "7");
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let c = s.generate("c.json", "8");
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
}

#[test]
fn generate_refuses_soo_under_single_tagging() {
    let s = Scratch::new();
    let out = prgc(&[
        "generate",
        "--config",
        &s.path("small.toml"),
        "--tagging",
        "single",
        "--out",
        &s.path("x.json"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("infeasible"));
    assert!(!Path::new(&s.path("x.json")).exists());
}

#[test]
fn stats_on_hand_counted_fixture() {
    let fixture = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/five.jsonl");
    let out = ok(&["stats", fixture, "--json"]);
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let expected = serde_json::json!({
        "sentences": 5, "normal": 2, "seo": 1, "epo": 1, "soo": 1,
        "n_eq_1": 2, "n_gt_1": 2, "triples": 6, "relations": 6
    });
    assert_eq!(v, expected);

    let table = String::from_utf8(ok(&["stats", fixture]).stdout).unwrap();
    let lines: Vec<&str> = table.lines().collect();
    assert!(lines[0].split_whitespace().eq([
        "Sentences",
        "Normal",
        "SEO",
        "EPO",
        "SOO",
        "N=1",
        "N>1",
        "#Triples",
        "#Relations"
    ]));
    assert!(lines[1]
        .split_whitespace()
        .eq(["5", "2", "1", "1", "1", "2", "2", "6", "6"]));

    let wide = ok(&["stats", fixture, "--json", "--seo-at-least-one"]);
    let v: serde_json::Value = serde_json::from_slice(&wide.stdout).unwrap();
    assert_eq!(v["seo"], 2);
}

#[test]
fn train_writes_artifacts_and_honors_epoch_override() {
    let s = Scratch::new();
    let data = s.generate("train.json", "1");
    let dir = s.train(&data, "run", &["--epochs", "1"]);
    let metrics = fs::read_to_string(dir.join("metrics.jsonl")).unwrap();
    assert_eq!(metrics.lines().count(), 1);
    assert!(dir.join("checkpoint.json").is_file());
    let snapshot = fs::read_to_string(dir.join("config.toml")).unwrap();
    assert!(snapshot.contains("epochs = 1"));
}

#[test]
fn missing_train_file_names_the_path() {
    let s = Scratch::new();
    let missing = s.path("nowhere.json");
    let out = prgc(&["train", "--train", &missing, "--out", &s.path("run")]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains(&missing));
}

#[test]
fn bad_config_key_is_a_usage_error() {
    let s = Scratch::new();
    let data = s.generate("train.json", "1");
    fs::write(s.path("bad.toml"), "[train]\nepoch = 3\n").unwrap();
    let out = prgc(&[
        "train",
        "--config",
        &s.path("bad.toml"),
        "--train",
        &data,
        "--out",
        &s.path("run"),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.toml") && err.contains("epoch"), "{err}");
}

#[test]
fn predict_eval_and_thresholds() {
    let s = Scratch::new();
    let data = s.generate("train.json", "3");
    let dir = s.train(&data, "run", &[]);
    let ckpt = dir.join("checkpoint.json").to_string_lossy().into_owned();

    fs::write(s.path("empty.json"), "").unwrap();
    ok(&[
        "predict",
        "--checkpoint",
        &ckpt,
        "--test",
        &s.path("empty.json"),
        "--out",
        &s.path("empty.out"),
    ]);
    assert_eq!(fs::read_to_string(s.path("empty.out")).unwrap(), "");

    let (lo, hi) = (s.path("lo.json"), s.path("hi.json"));
    ok(&[
        "predict",
        "--checkpoint",
        &ckpt,
        "--test",
        &data,
        "--out",
        &lo,
        "--lambda1",
        "0.5",
    ]);
    ok(&[
        "predict",
        "--checkpoint",
        &ckpt,
        "--test",
        &data,
        "--out",
        &hi,
        "--lambda1",
        "0.99",
    ]);
    assert!(count_triples(Path::new(&hi)) <= count_triples(Path::new(&lo)));

    let again = s.path("lo2.json");
    ok(&[
        "predict",
        "--checkpoint",
        &ckpt,
        "--test",
        &data,
        "--out",
        &again,
        "--lambda1",
        "0.5",
    ]);
    assert_eq!(fs::read(&lo).unwrap(), fs::read(&again).unwrap());

    let report = s.path("report.json");
    let out = ok(&["eval", "--pred", &lo, "--test", &data, "--out", &report]);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("triples") && stdout.contains("relations"));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    let f1 = v["overall"]["f1"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f1));

    let mut lines: Vec<String> = fs::read_to_string(&lo)
        .unwrap()
        .lines()
        .map(String::from)
        .collect();
    lines.swap(0, 1);
    let swapped = s.path("swapped.json");
    fs::write(&swapped, lines.join("\n")).unwrap();
    let out = prgc(&["eval", "--pred", &swapped, "--test", &data]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("id"));
}

#[test]
fn resolved_config_reproduces_the_run() {
    let s = Scratch::new();
    let data = s.generate("train.json", "4");
    let first = s.train(&data, "first", &["--seed", "5", "--batch-size", "4"]);
    let snapshot = first.join("config.toml").to_string_lossy().into_owned();
    let second = s.path("second");
    ok(&[
        "train", "--config", &snapshot, "--train", &data, "--out", &second,
    ]);
    let second = PathBuf::from(second);
    for name in ["checkpoint.json", "metrics.jsonl", "config.toml"] {
        assert_eq!(
            fs::read(first.join(name)).unwrap(),
            fs::read(second.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn default_epochs_give_a_hundred_metric_lines() {
    let s = Scratch::new();
    let data = s.generate("train.json", "2");
    fs::write(s.path("desk.toml"), "[encoder]\ndim = 8\n").unwrap();
    let out = s.path("run");
    ok(&[
        "train",
        "--config",
        &s.path("desk.toml"),
        "--train",
        &data,
        "--out",
        &out,
    ]);
    let metrics = fs::read_to_string(Path::new(&out).join("metrics.jsonl")).unwrap();
    assert_eq!(metrics.lines().count(), 100);
    for line in metrics.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v["loss_total"].as_f64().unwrap().is_finite());
    }
}
