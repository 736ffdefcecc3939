//! Lower a formulation to a computational model, export it in LP format and
//! solve it with both solver backends.
//!
//! cargo run --example lower_and_solve [-- FORMULATION.json]

use std::path::PathBuf;

use autoformulate::model::deserialize;
use autoformulate::solver::{lower, to_lp_string, SolveLimits, SolverKind};

fn main() -> anyhow::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/formulations/furniture.json"));
    let f = deserialize(&std::fs::read(&path)?)?;
    let model = lower(&f)?;
    println!("{} columns, {} rows", model.columns.len(), model.rows.len());
    print!("{}", to_lp_string(&model));

    for kind in [SolverKind::Builtin, SolverKind::Microlp] {
        let r = kind.backend().solve(&model, &SolveLimits::default());
        println!("{kind:?}: {:?} objective {:?} at {:?}", r.status, r.objective_value, r.assignment.unwrap_or_default());
    }
    Ok(())
}
