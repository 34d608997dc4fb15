//! Command-line behaviour: exit codes, artifact headers and stage chaining.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").canonicalize().unwrap()
}

/// The set-4 config with an absolute corpus path and a small search, so a
/// full run takes a few seconds.
fn quick_config(dir: &Path, extra: &str) -> PathBuf {
    let corpus = repo_root().join("data/mini-corpus.jsonl");
    let text = fs::read_to_string(repo_root().join("configs/paper-set4.toml"))
        .unwrap()
        .replace("../data/mini-corpus.jsonl", corpus.to_str().unwrap())
        .replace("population = 400", "population = 40")
        .replace("crossovers = 240", "crossovers = 24")
        .replace("mutations = 120", "mutations = 12")
        .replace("generations = 500", "generations = 10")
        .replace("scan_bootstrap = 1000", "scan_bootstrap = 50");
    let path = dir.join("quick.toml");
    fs::write(&path, format!("{extra}{text}")).unwrap();
    path
}

fn coauthor(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_coauthor")).args(args).env_remove("COAUTHOR_OUT").output().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().path()).collect();
    v.sort();
    v
}

#[test]
fn missing_input_exits_2_and_names_the_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path(), "");
    let text = fs::read_to_string(&cfg).unwrap().replace("mini-corpus.jsonl", "absent.jsonl");
    fs::write(&cfg, text).unwrap();
    let out = tmp.path().join("out");
    let o = coauthor(&["ingest", "-c", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("absent.jsonl"));
}

#[test]
fn missing_config_exits_2() {
    let o = coauthor(&["ingest", "-c", "/nonexistent/config.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_flag_exits_2() {
    let o = coauthor(&["ingest", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_config_key_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path(), "colour = \"blue\"\n");
    let o = coauthor(&["ingest", "-c", s(&cfg), "--out", s(&tmp.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("colour"));
}

#[test]
fn zero_threads_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path(), "");
    let o = coauthor(&["ingest", "-c", s(&cfg), "--threads", "0", "--out", s(&tmp.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn stochastic_stages_need_a_seed() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path(), "");
    let out = tmp.path().join("out");
    for stage in ["tune", "predict", "evaluate", "pipeline"] {
        let o = coauthor(&[stage, "-c", s(&cfg), "--out", s(&out)]);
        assert_eq!(o.status.code(), Some(2), "{stage}");
        assert!(String::from_utf8_lossy(&o.stderr).contains("seed"), "{stage}");
    }
    // Deterministic stages run without one.
    let o = coauthor(&["ingest", "-c", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let head = fs::read_to_string(out.join("corpus.jsonl")).unwrap();
    assert!(head.lines().next().unwrap().ends_with("seed=none"));
}

#[test]
fn stage_before_its_inputs_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path(), "seed = 3\n");
    let o = coauthor(&["train", "-c", s(&cfg), "--out", s(&tmp.path().join("out"))]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn corrupt_artifact_exits_1() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path(), "seed = 3\n");
    let out = tmp.path().join("out");
    assert!(coauthor(&["ingest", "-c", s(&cfg), "--out", s(&out)]).status.success());
    let corpus = out.join("corpus.jsonl");
    let mut text = fs::read_to_string(&corpus).unwrap();
    text.push_str("{not json\n");
    fs::write(&corpus, text).unwrap();
    let o = coauthor(&["matrices", "-c", s(&cfg), "--out", s(&out)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn zero_generations_keeps_the_best_initial_candidate() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path(), "seed = 5\n");
    let text = fs::read_to_string(&cfg).unwrap().replace("generations = 10", "generations = 0");
    fs::write(&cfg, text).unwrap();
    let out = tmp.path().join("out");
    for stage in ["ingest", "matrices", "train", "tune"] {
        let o = coauthor(&[stage, "-c", s(&cfg), "--out", s(&out)]);
        assert!(o.status.success(), "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let hp: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("hyperparams.json")).unwrap()).unwrap();
    let tau = hp["tau"].as_f64().unwrap();
    let upsilon = hp["upsilon"].as_f64().unwrap();
    assert!(tau > 0.0 && tau <= 0.4, "{tau}");
    assert!((0.6..=1.0).contains(&upsilon), "{upsilon}");
}

#[test]
fn staged_run_matches_pipeline_and_every_artifact_has_a_header() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path(), "");
    let whole = tmp.path().join("whole");
    let staged = tmp.path().join("staged");
    let o = coauthor(&["pipeline", "-c", s(&cfg), "--seed", "9", "--out", s(&whole)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for stage in ["ingest", "matrices", "train", "tune", "predict", "evaluate", "report"] {
        let o = coauthor(&[stage, "-c", s(&cfg), "--seed", "9", "--out", s(&staged)]);
        assert!(o.status.success(), "{stage}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let a = files(&whole);
    let b = files(&staged);
    assert_eq!(a.iter().map(|p| p.file_name()).collect::<Vec<_>>(), b.iter().map(|p| p.file_name()).collect::<Vec<_>>());
    for name in ["lambda.csv", "zeta.csv", "hyperparams.json", "forecasts.csv", "evaluate.json", "report.json"] {
        assert!(whole.join(name).exists(), "{name}");
    }
    for (x, y) in a.iter().zip(&b) {
        let text = fs::read_to_string(x).unwrap();
        assert_eq!(text, fs::read_to_string(y).unwrap(), "{}", x.display());
        let first = text.lines().next().unwrap_or("");
        let ext = x.extension().unwrap().to_str().unwrap();
        match ext {
            "csv" | "jsonl" => assert!(first.starts_with("# config=") && first.ends_with("seed=9"), "{}", x.display()),
            "svg" => assert!(first.starts_with("<!-- config=") && first.contains("seed=9"), "{}", x.display()),
            "json" => {
                let v: serde_json::Value = serde_json::from_str(&text).unwrap();
                assert_eq!(v["meta"]["seed"], 9, "{}", x.display());
                assert!(v["meta"]["config"].is_string(), "{}", x.display());
            }
            other => panic!("unexpected artifact type {other}"),
        }
    }
}

#[test]
fn output_directory_falls_back_to_the_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = quick_config(tmp.path(), "");
    let out = tmp.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_coauthor"))
        .args(["ingest", "-c", s(&cfg)])
        .env("COAUTHOR_OUT", &out)
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(out.join("corpus.jsonl").exists());
    assert!(!tmp.path().join("out").exists());
}
