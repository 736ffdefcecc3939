//! The generator gateway on its own: render the first-stage prompt, sample
//! candidates from the recorded fixtures, group them and rank the groups.
//! Swap `ScriptedBackend` for `SimulatedExpert` or `HttpBackend` to talk to
//! something live.
//!
//! cargo run --example gateway

use std::path::Path;
use std::sync::Arc;

use autoformulate::gateway::{generation_prompt, Gateway, GatewayConfig, Phase, ScriptedBackend};
use autoformulate::harness::load_dataset;
use autoformulate::model::PartialFormulation;

fn main() -> anyhow::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/micro_benchmark");
    let problem = load_dataset(&dir.join("dataset.jsonl"))?.into_iter().find(|p| p.id == "furniture").expect("bundled problem");
    let backend = ScriptedBackend::from_file(&dir.join("fixtures.jsonl"))?;
    println!("{} recorded responses", backend.len());
    let gateway = Gateway::new(Arc::new(backend), GatewayConfig::default());

    let root = PartialFormulation::root();
    let prompt = generation_prompt(Phase::for_stage(1), &problem.text, &root);
    println!("stage 1 prompt {} ({} bytes), opening lines:", &prompt.sha256()[..12], prompt.text.len());
    for line in prompt.text.lines().filter(|l| !l.trim().is_empty()).take(4) {
        println!("  | {line}");
    }

    let cands = gateway.generate_candidates(1, &problem.text, &root, 10)?;
    let groups = gateway.group_variable_sets(&problem.text, &cands)?;
    println!("{} candidates in {} groups: {groups:?}", cands.len(), groups.len());
    let reps: Vec<_> = groups.iter().map(|g| cands[g[0]].clone()).collect();
    let rank = gateway.rank_candidates(1, &problem.text, &root, &reps)?;
    for (r, &k) in rank.order.iter().enumerate() {
        println!("  rank {} group {k} prior {:.3}", r + 1, rank.scores[k]);
    }

    for phase in [Phase::Parameters, Phase::Variables, Phase::Group, Phase::Rank] {
        println!("{phase:?}: {} calls", gateway.calls_in_phase(phase));
    }
    Ok(())
}
