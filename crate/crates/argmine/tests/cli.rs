mod common;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use argmine::generators::write_replay_fixture;
use common::{fixtures, synthetic_pair, write_corpus};

fn argmine(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_argmine"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Workspace {
    _tmp: tempfile::TempDir,
    en: PathBuf,
    fa: PathBuf,
    out: PathBuf,
    root: PathBuf,
}

fn workspace(n_docs: usize) -> Workspace {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path().to_path_buf();
    let (en, fa) = synthetic_pair(n_docs, n_docs * 4, n_docs, 21);
    write_corpus(&root.join("en"), &en);
    write_corpus(&root.join("fa"), &fa);
    Workspace {
        en: root.join("en"),
        fa: root.join("fa"),
        out: root.join("out"),
        root,
        _tmp: tmp,
    }
}

fn pipeline_args<'a>(w: &'a Workspace, scenario: &'a str) -> Vec<&'a str> {
    vec![
        "pipeline",
        "--en-dir",
        s(&w.en),
        "--fa-dir",
        s(&w.fa),
        "--output-dir",
        s(&w.out),
        "--scenario",
        scenario,
        "--encoder",
        "tiny",
        "--max-epochs",
        "1",
        "--batch-size",
        "16",
    ]
}

#[test]
fn stats_english_only_warns() {
    let w = workspace(4);
    let o = argmine(&["stats", "--en-dir", s(&w.en)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("English only"));
    let pro = stdout(&o)
        .lines()
        .find(|l| l.starts_with("pro "))
        .unwrap()
        .to_string();
    assert_eq!(pro.split_whitespace().collect::<Vec<_>>(), ["pro", "16"]);

    let o = argmine(&["stats", "--en-dir", s(&w.en), "--fa-dir", s(&w.fa)]);
    assert!(o.status.success());
    let pro = stdout(&o)
        .lines()
        .find(|l| l.starts_with("pro "))
        .unwrap()
        .to_string();
    assert_eq!(pro.split_whitespace().count(), 3);
}

#[test]
fn stats_corrupt_file_is_a_data_error() {
    let w = workspace(3);
    fs::write(w.en.join("micro_bad.xml"), "<arggraph><edu id=").unwrap();
    let o = argmine(&["stats", "--en-dir", s(&w.en)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("micro_bad.xml"), "{}", stderr(&o));

    let o = argmine(&["stats", "--en-dir", s(&w.en), "--lenient"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn stats_with_pe_summary() {
    let o = argmine(&[
        "stats",
        "--en-dir",
        s(&fixtures().join("cases/en")),
        "--pe-dir",
        s(&fixtures().join("pe")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("1 essays, 4 paragraphs"));
}

#[test]
fn validate_reports_violations() {
    let o = argmine(&["validate", s(&fixtures().join("cases/en"))]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert!(stdout(&o).contains("2 documents, 0 violations"));

    let dir = tempfile::tempdir().unwrap();
    let xml = fs::read_to_string(fixtures().join("cases/en/micro_d14.xml")).unwrap();
    // Point the undercut at a node instead of an edge.
    let broken = xml.replacen(r#"src="a3" trg="c1""#, r#"src="a3" trg="a1""#, 1);
    assert_ne!(broken, xml);
    fs::write(dir.path().join("micro_d14.xml"), broken).unwrap();
    let o = argmine(&["validate", s(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let out = stdout(&o);
    assert!(out.contains("micro_d14: BAD_UNDERCUT_TARGET"), "{out}");
    // a3 no longer attaches anywhere, so a1 and a3 both look like roots.
    assert!(out.contains("micro_d14: MULTIPLE_ROOTS at `a3`"), "{out}");
    assert!(out.contains("1 documents, 3 violations"), "{out}");

    let o = argmine(&["validate", s(&fixtures().join("bad"))]);
    assert!(o.status.success());
    assert!(stderr(&o).contains("no document files"));
}

#[test]
fn convert_pe_writes_graphs_and_traces() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("pe_xml");
    let o = argmine(&["convert-pe", s(&fixtures().join("pe")), "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(out.join("essay001.xml").is_file());
    let traces = fs::read_to_string(out.join("traces.jsonl")).unwrap();
    assert_eq!(traces.lines().count(), 1);
    let t: serde_json::Value = serde_json::from_str(traces.lines().next().unwrap()).unwrap();
    assert_eq!(t["steps"].as_array().unwrap().len(), 6);

    let o = argmine(&["validate", s(&out)]);
    assert!(o.status.success(), "{}", stdout(&o));
}

#[test]
fn zero_shot_pipeline_then_skip_then_force() {
    let w = workspace(20);
    let args = pipeline_args(&w, "zero_shot");
    let o = argmine(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let run_dir = PathBuf::from(stdout(&o).lines().last().unwrap());
    assert!(run_dir
        .file_name()
        .unwrap()
        .to_str()
        .unwrap()
        .starts_with("zero_shot-"));
    for f in [
        "manifest.json",
        "bundle/bundle.json",
        "checkpoint/weights.safetensors",
        "reports/metrics.json",
        "reports/results.txt",
        "reports/cases.txt",
    ] {
        assert!(run_dir.join(f).is_file(), "missing {f}");
    }
    assert!(!run_dir.join("augment").exists());
    let results = fs::read_to_string(run_dir.join("reports/results.txt")).unwrap();
    assert!(
        results.contains("EN") && results.contains("FA"),
        "{results}"
    );
    let metrics: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(run_dir.join("reports/metrics.json")).unwrap())
            .unwrap();
    let sets: Vec<&str> = metrics
        .as_array()
        .unwrap()
        .iter()
        .map(|e| e["eval_set"].as_str().unwrap())
        .collect();
    assert!(sets.contains(&"en") && sets.contains(&"fa"), "{sets:?}");

    let manifest = fs::read(run_dir.join("manifest.json")).unwrap();
    let o = argmine(&args);
    assert!(o.status.success());
    let err = stderr(&o);
    for stage in ["build", "train", "eval", "report"] {
        assert!(err.contains(&format!("{stage}: up to date")), "{err}");
    }
    assert_eq!(fs::read(run_dir.join("manifest.json")).unwrap(), manifest);

    let mut forced = args.clone();
    forced.push("--force");
    let o = argmine(&forced);
    assert!(o.status.success());
    assert!(stderr(&o).contains("train: running"));
    // Same seed, same bundle.
    let bundle_a: serde_json::Value = serde_json::from_slice(&manifest).unwrap();
    let bundle_b: serde_json::Value =
        serde_json::from_slice(&fs::read(run_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(bundle_a["stages"]["build"], bundle_b["stages"]["build"]);
}

#[test]
fn build_only_stops_before_training() {
    let w = workspace(12);
    let mut args = pipeline_args(&w, "cross_lingual");
    args[0] = "build";
    let o = argmine(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    let run_dir = PathBuf::from(stdout(&o).lines().last().unwrap());
    assert!(run_dir.join("bundle/bundle.json").is_file());
    assert!(!run_dir.join("checkpoint").exists());
}

#[test]
fn llm_aug_without_generator_fails_before_work() {
    let w = workspace(4);
    let o = argmine(&pipeline_args(&w, "llm_aug"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("generator"), "{}", stderr(&o));
    assert!(!w.out.exists());
}

#[test]
fn missing_corpus_dir_is_a_usage_error() {
    let o = argmine(&["build", "--en-dir", "/nonexistent/corpus"]);
    assert_eq!(o.status.code(), Some(1));
    let o = argmine(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn llm_aug_replay_pipeline_from_config_file() {
    let w = workspace(20);
    let fixture = w.root.join("fixture.jsonl");
    write_replay_fixture(&fixture, &common::replay_records(120, 120, 3)).unwrap();
    let config = serde_json::json!({
        "en_dir": "en",
        "fa_dir": "fa",
        "scenario": "llm_aug",
        "seed": 4,
        "augmentation": {
            "generator": {"name": "replay"},
            "fixture": "fixture.jsonl",
            "settings": {"target_per_class": 90}
        },
        "model": {"encoder_id": "tiny"},
        "train": {"max_epochs": 1, "batch_size": 16},
        "output_dir": "out"
    });
    let cfg_path = w.root.join("run.json");
    fs::write(&cfg_path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    let o = argmine(&["pipeline", "-c", s(&cfg_path)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let run_dir = PathBuf::from(stdout(&o).lines().last().unwrap());
    assert!(run_dir.starts_with(&w.out));
    assert!(run_dir.join("augment/synthetic.jsonl").is_file());
    let review = fs::read_to_string(run_dir.join("augment/review.csv")).unwrap();
    assert!(review.starts_with("stance,generator,reason,text"));
    assert!(stdout(&o).contains("replay"));

    // A flag overrides the file and yields a different run.
    let o2 = argmine(&["build", "-c", s(&cfg_path), "--seed", "5"]);
    assert!(o2.status.success(), "{}", stderr(&o2));
    assert_ne!(stdout(&o2).lines().last(), stdout(&o).lines().last());
}
