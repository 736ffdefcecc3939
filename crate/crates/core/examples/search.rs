//! A complete tree search on one problem against the pool-driven simulated
//! expert. The budget and pruning width can be changed on the command line,
//! which the recorded fixtures would not allow.
//!
//! cargo run --example search [-- PROBLEM_ID [T] [I]]

use std::path::Path;
use std::sync::Arc;

use autoformulate::gateway::{Gateway, SimulatedExpert};
use autoformulate::harness::{load_dataset, render_tree, RunConfig};
use autoformulate::search::run_search;

fn main() -> anyhow::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/micro_benchmark");
    let args: Vec<String> = std::env::args().skip(1).collect();
    let id = args.first().map_or("staffing", String::as_str);
    let mut config = RunConfig::load(&dir.join("config.toml"))?;
    if let Some(t) = args.get(1) {
        config.search.t = t.parse()?;
    }
    if let Some(i) = args.get(2) {
        config.search.i = i.parse()?;
    }
    config.search.validate()?;

    let problem = load_dataset(&dir.join("dataset.jsonl"))?.into_iter().find(|p| p.id == id).ok_or_else(|| anyhow::anyhow!("no problem `{id}`"))?;
    let gateway = Gateway::new(Arc::new(SimulatedExpert::from_file(&dir.join("pools.toml"))?), config.gateway);
    let out = run_search(&problem.text, &gateway, &config.search)?;

    print!("{}", render_tree(&out.tree, config.search.lambda));
    println!("{} rollouts, {} model calls, ground truth {:?}", out.rollouts.len(), gateway.call_log().len(), problem.ground_truth_objective);
    for r in &out.records {
        println!("record {}: reward {:.3} objective {:?}", r.ordinal, r.reward, r.objective_value());
    }
    Ok(())
}
