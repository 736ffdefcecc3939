//! Replay the bundled micro-benchmark from fixtures and score it: per-problem
//! correctness of each terminal record, then the aggregate tables.
//!
//! cargo run --example scoring [-- WORKERS]

use std::path::Path;
use std::sync::Arc;

use autoformulate::gateway::ScriptedBackend;
use autoformulate::harness::{correctness, load_dataset, render_table, run_dataset, score_runs, Metric, RunConfig, RunRecord};

fn main() -> anyhow::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/micro_benchmark");
    let problems = load_dataset(&dir.join("dataset.jsonl"))?;
    let mut config = RunConfig::load(&dir.join("config.toml"))?;
    if let Some(w) = std::env::args().nth(1) {
        config.workers = w.parse()?;
    }
    let backend = Arc::new(ScriptedBackend::from_file(&dir.join("fixtures.jsonl"))?);
    let runs = run_dataset(&problems, &config, backend);
    let records: Vec<RunRecord> = runs.iter().map(|r| r.record.clone()).collect();

    for r in &records {
        let (Some(search), Some(truth)) = (&r.search, r.ground_truth_objective) else { continue };
        let marks: String = correctness(&search.records, truth).iter().map(|&c| if c { '+' } else { '.' }).collect();
        println!("{:<12} truth {truth:<6} records {marks}", r.problem_id);
    }
    for metric in [Metric::PassAt(1), Metric::PassAt(3), Metric::BestOf(3), Metric::Accuracy, Metric::Entropy] {
        println!();
        let table = render_table(&score_runs(&records, metric), metric, false);
        for line in table.lines().filter(|l| !l.starts_with("problem")) {
            println!("{line}");
        }
    }
    Ok(())
}
