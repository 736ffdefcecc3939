//! Re-records `data/micro_benchmark/fixtures.jsonl` by running the search
//! against the pool-driven simulated expert and keeping every response.
//!
//! cargo run --example record_fixtures [-- DATA_DIR]

use std::path::PathBuf;
use std::sync::Arc;

use autoformulate::gateway::{write_fixtures, GeneratorBackend, RecordingBackend, SimulatedExpert};
use autoformulate::harness::{load_dataset, run_dataset, RunConfig};

fn main() -> anyhow::Result<()> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/micro_benchmark"));
    let problems = load_dataset(&dir.join("dataset.jsonl"))?;
    let config = RunConfig::load(&dir.join("config.toml"))?;
    let expert: Arc<dyn GeneratorBackend> = Arc::new(SimulatedExpert::from_file(&dir.join("pools.toml"))?);
    let recorder = Arc::new(RecordingBackend::new(expert));

    let runs = run_dataset(&problems, &config, recorder.clone());
    for run in &runs {
        if let Some(e) = &run.record.error {
            anyhow::bail!("{}: {e}", run.record.problem_id);
        }
    }

    let mut entries = recorder.entries();
    entries.sort_by(|a, b| (&a.prompt_sha256, a.ordinal).cmp(&(&b.prompt_sha256, b.ordinal)));
    let path = dir.join("fixtures.jsonl");
    write_fixtures(&path, &entries)?;
    println!("{} responses for {} problems -> {}", entries.len(), runs.len(), path.display());
    Ok(())
}
