use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn clickbait(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clickbait"))
        .args(args)
        .env("CLICKBAIT_RESOURCE_ROOT", fixtures())
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = clickbait(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn config() -> String {
    fixtures().join("config.toml").to_string_lossy().into_owned()
}

#[test]
fn missing_dataset_exits_two_and_names_path() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    let res = clickbait(&["detect", "--dataset", "/no/such/corpus.jsonl", "--out", out]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("/no/such/corpus.jsonl"));
}

#[test]
fn unknown_mode_is_a_usage_error() {
    let res = clickbait(&["eval", "--config", &config(), "--mode", "sideways", "--show-config"]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn summarize_writes_one_record_per_document() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("three.jsonl");
    let corpus = std::fs::read_to_string(fixtures().join("corpus.jsonl")).unwrap();
    std::fs::write(&data, corpus.lines().take(3).map(|l| format!("{l}\n")).collect::<String>()).unwrap();
    let out = tmp.path().join("out");
    ok(&["summarize", "--dataset", data.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let text = std::fs::read_to_string(out.join("summaries.jsonl")).unwrap();
    let records: Vec<serde_json::Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 3);
    for r in &records {
        assert_eq!(r["generator_tag"], "extractive:extractive_fallback");
        assert!(!r["summary"].as_str().unwrap().is_empty());
    }
}

#[test]
fn single_strategy_provenance() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    ok(&["build-verbalizer", "--config", &config(), "--out", out, "--strategies", "mlm"]);
    let tsv = std::fs::read_to_string(tmp.path().join("verbalizer.tsv")).unwrap();
    let rows: Vec<&str> = tsv.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
    assert!(rows.len() > 2);
    for row in rows {
        let provenance = row.split('\t').nth(3).unwrap();
        for tag in provenance.split(',') {
            assert!(tag == "mlm_prediction" || tag == "label_name", "{row}");
        }
    }
}

#[test]
fn empty_concept_base_still_builds() {
    let tmp = tempfile::tempdir().unwrap();
    let concepts = tmp.path().join("concepts.tsv");
    std::fs::write(&concepts, "").unwrap();
    let out = tmp.path().join("out");
    ok(&[
        "build-verbalizer",
        "--config", &config(),
        "--concepts", concepts.to_str().unwrap(),
        "--out", out.to_str().unwrap(),
    ]);
    let tsv = std::fs::read_to_string(out.join("verbalizer.tsv")).unwrap();
    assert!(!tsv.contains("concepts"));
    assert!(tsv.lines().count() > 4);
}

#[test]
fn flags_override_file_which_overrides_defaults() {
    let out = ok(&["eval", "--config", &config(), "--template", "2", "--show-config"]);
    let shown = String::from_utf8(out.stdout).unwrap();
    assert!(shown.contains("template = 2"), "{shown}");
    assert!(shown.contains("seed = 3"), "{shown}");
    assert!(shown.contains("batch_size = 32"), "{shown}");
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let mut snapshots = Vec::new();
    for run in ["first", "second"] {
        let out = tmp.path().join(run);
        let o = out.to_str().unwrap();
        ok(&["build-verbalizer", "--config", &config(), "--out", o]);
        ok(&["detect", "--config", &config(), "--out", o]);
        ok(&["train", "--config", &config(), "--out", o, "--epochs", "3"]);
        snapshots.push(
            ["verbalizer.tsv", "prompts.jsonl", "detections.jsonl", "head.json", "split.json"]
                .map(|f| std::fs::read(out.join(f)).unwrap()),
        );
    }
    assert_eq!(snapshots[0], snapshots[1]);
}

#[test]
fn sweep_reports_every_grid_point() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().to_str().unwrap();
    ok(&["build-verbalizer", "--config", &config(), "--out", out]);
    ok(&[
        "sweep", "--config", &config(), "--out", out,
        "--axis", "batch_size", "--grid", "4,8", "--seeds", "1", "--epochs", "2",
    ]);
    let tsv = std::fs::read_to_string(tmp.path().join("sweep.tsv")).unwrap();
    assert_eq!(tsv.lines().count(), 3, "{tsv}");
}
