//! Trivial-equivalence checking: compare whole formulations, then prune a
//! batch of inequality candidates down to one representative per class.
//!
//! cargo run --example equivalence

use std::path::Path;

use autoformulate::equiv::{check_formulations, prune_candidates};
use autoformulate::model::{deserialize, Component, ConstraintKind, ConstraintSet, Formulation, PartialFormulation};

fn load(name: &str) -> anyhow::Result<Formulation> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/formulations").join(name);
    Ok(deserialize(&std::fs::read(path)?)?)
}

fn main() -> anyhow::Result<()> {
    let base = load("furniture.json")?;
    for other in ["furniture_scaled.json", "furniture_loose.json"] {
        let v = check_formulations(&base, &load(other)?)?;
        println!("furniture vs {other}: all equivalent = {}", v.all_equivalent());
        println!("  objective {:?}", v.objective);
        println!("  inequalities {:?}", v.inequalities);
    }

    let mut context = PartialFormulation::root();
    for c in base.components().into_iter().take(3) {
        context.push(c)?;
    }
    let candidates: Vec<Component> = [
        vec!["5*x[0] + 20*x[1] <= 400", "10*x[0] + 15*x[1] <= 450"],
        vec!["2*x[0] + 3*x[1] <= 90", "x[0] + 4*x[1] <= 80"],
        vec!["5*x[0] + 20*x[1] <= 400"],
        vec!["10*x[0] + 15*x[1] <= 450", "5*x[0] + 20*x[1] <= 400", "x[0] <= 100"],
        vec!["x[0] * x[1] <= 400"],
    ]
    .into_iter()
    .map(|rows| {
        Component::Inequalities(ConstraintSet::from_pairs(ConstraintKind::Inequality, rows.into_iter().enumerate().map(|(i, r)| (format!("c{i}"), r.to_string()))))
    })
    .collect();

    let out = prune_candidates(&candidates, 4, &context);
    println!("{} candidates, retained {:?}", candidates.len(), out.retained);
    for (k, rep) in out.class_of.iter().enumerate() {
        let note = out.quarantined[k].as_deref().map(|q| format!("  (quarantined: {q})")).unwrap_or_default();
        println!("  candidate {k} -> class of {rep}{note}");
    }
    Ok(())
}
