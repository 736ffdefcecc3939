//! Load a formulation, split it into the four search-tree components,
//! validate it and show what validation reports for a broken variant.
//!
//! cargo run --example formulation [-- FORMULATION.json]

use std::path::PathBuf;

use autoformulate::model::{deserialize, serialize, validate, validate_partial, PartialFormulation};

fn main() -> anyhow::Result<()> {
    let path = std::env::args()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/formulations/furniture.json"));
    let f = deserialize(&std::fs::read(&path)?)?;
    println!("{}: {} parameters, {} variable declarations", path.display(), f.parameters.entries.len(), f.variables.len());

    // Depth 1 to 4 of a search path: variables, objective, equalities, inequalities.
    let mut partial = PartialFormulation::root();
    for c in f.components() {
        partial.push(c)?;
        println!("depth {}: {} violations", partial.depth(), validate_partial(&partial).len());
    }
    assert_eq!(partial.to_formulation().as_ref(), Some(&f));
    assert_eq!(deserialize(&serialize(&f))?, f);

    let mut broken = f.clone();
    broken.inequalities.entries.insert("typo".into(), "sum(wood_use[i] * y[i] for i in range(2)) <= wood".into());
    broken.inequalities.entries.insert("strict".into(), "x[0] < 3".into());
    println!("broken variant:");
    for v in validate(&broken) {
        println!("  {v}");
    }
    Ok(())
}
