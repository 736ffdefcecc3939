//! End-to-end checks of the command-line surface through `cli::run_with`.

mod common;

use std::path::{Path, PathBuf};

use autoformulate::cli::{run_with, Failure};

use common::data_dir;

fn call(args: &[&str]) -> Result<String, Failure> {
    let mut out = Vec::new();
    let argv = std::iter::once("autoformulate").chain(args.iter().copied()).map(str::to_string);
    run_with(argv, &mut out).map(|()| String::from_utf8(out).unwrap())
}

fn ok(args: &[&str]) -> String {
    call(args).unwrap_or_else(|f| panic!("{args:?} failed with {}: {}", f.code, f.message))
}

fn code(args: &[&str]) -> u8 {
    match call(args) {
        Ok(_) => 0,
        Err(f) => f.code,
    }
}

fn formulation(name: &str) -> String {
    data_dir().parent().unwrap().join("formulations").join(name).display().to_string()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// The first three bundled problems, replayed into `out`.
fn run_subset(dir: &Path, out: &Path) -> String {
    let all = std::fs::read_to_string(data_dir().join("dataset.jsonl")).unwrap();
    let subset: String = all.lines().take(3).map(|l| format!("{l}\n")).collect();
    let dataset = dir.join("subset.jsonl");
    std::fs::write(&dataset, subset).unwrap();
    let config = data_dir().join("config.toml");
    ok(&["run", "--dataset", s(&dataset), "--config", s(&config), "--out", s(out)])
}

fn record_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| !p.to_string_lossy().ends_with(".timings.json"))
        .collect();
    files.sort();
    files.into_iter().map(|p| (p.file_name().unwrap().into(), std::fs::read(&p).unwrap())).collect()
}

#[test]
fn run_is_byte_deterministic_and_scores() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let summary = run_subset(tmp.path(), &a);
    run_subset(tmp.path(), &b);
    assert_eq!(summary.lines().count(), 3);
    assert!(summary.lines().all(|l| l.ends_with("terminals")), "{summary}");
    let (ra, rb) = (record_bytes(&a), record_bytes(&b));
    assert_eq!(ra.len(), 6, "run record and call log per problem");
    assert_eq!(ra, rb);

    let table = ok(&["score", "--runs", s(&a), "--metric", "pass@3", "--tsv"]);
    let all = table.lines().find(|l| l.starts_with("aggregate\tall\t")).unwrap_or_else(|| panic!("{table}"));
    assert_eq!(all.split('\t').nth(2), Some("1.0000"), "{table}");
    for metric in ["pass@1", "best-of-3", "accuracy", "entropy"] {
        assert!(ok(&["score", "--runs", s(&a), "--metric", metric]).contains("all"));
    }

    let run = a.join("furniture.run.json");
    let text = ok(&["inspect", "--run", s(&run)]);
    let record: serde_json::Value = serde_json::from_slice(&std::fs::read(&run).unwrap()).unwrap();
    let nodes = record["search"]["tree"]["nodes"].as_array().unwrap().len();
    assert!(text.starts_with(&format!("problem furniture  nodes {nodes} ")), "{text}");
}

#[test]
fn equiv_check_reports_each_component() {
    let out = ok(&["equiv", "check", &formulation("furniture.json"), &formulation("furniture_scaled.json")]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["all_equivalent"], true);
    assert_eq!(v["inequality_constraints"]["verdict"], "equivalent");

    let out = ok(&["equiv", "check", &formulation("furniture.json"), &formulation("furniture_loose.json")]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["all_equivalent"], false);
    assert_eq!(v["objective"]["verdict"], "equivalent");
    assert_eq!(v["inequality_constraints"]["verdict"], "distinct");
    assert!(v["inequality_constraints"]["witness"].is_object());
}

#[test]
fn lower_solves_and_exports() {
    let out = ok(&["lower", "--formulation", &formulation("furniture.json"), "--solve"]);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["status"], "Optimal");
    assert_eq!(v["objective_value"], 2200.0);
    let micro = ok(&["lower", "--formulation", &formulation("furniture.json"), "--solve", "--solver", "microlp"]);
    assert_eq!(serde_json::from_str::<serde_json::Value>(&micro).unwrap()["objective_value"], 2200.0);

    let lp = ok(&["lower", "--formulation", &formulation("furniture.json"), "--lp"]);
    assert!(lp.starts_with("Maximize"));
    assert!(lp.contains("General"));
    assert!(lp.trim_end().ends_with("End"));

    let model: serde_json::Value = serde_json::from_str(&ok(&["lower", "--formulation", &formulation("furniture.json")])).unwrap();
    assert!(model.is_object());
}

#[test]
fn exit_codes_separate_usage_from_problem_failures() {
    assert_eq!(code(&["frobnicate"]), 2);
    assert_eq!(code(&["score", "--runs", "/nonexistent", "--metric", "pass@1"]), 2);
    assert_eq!(code(&["score", "--runs", ".", "--metric", "pass@0x"]), 2);
    assert_eq!(code(&["lower", "--formulation", "/nonexistent.json"]), 2);
    assert_eq!(code(&["run", "--dataset", "/nonexistent.jsonl", "--out", "/tmp/x"]), 2);

    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.json");
    std::fs::write(&bad, "{\"parameters\": 3}").unwrap();
    assert_eq!(code(&["lower", "--formulation", s(&bad)]), 2);

    assert_eq!(code(&["lower", "--formulation", &formulation("infeasible.json"), "--solve"]), 1);
    assert_eq!(code(&["lower", "--formulation", &formulation("infeasible.json")]), 0);
}
