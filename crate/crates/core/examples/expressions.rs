//! Parse a quantified constraint, unroll its comprehension and read off the
//! linear form of each grounded row.
//!
//! cargo run --example expressions

use autoformulate::expr::{ground, parse_relation, relation_to_linear, VarTable};
use autoformulate::model::{DecisionVariableDecl, ParamValue, ParameterTable, VarKind};

fn main() -> anyhow::Result<()> {
    let params = ParameterTable::new()
        .with("supply", ParamValue::List(vec![30.0, 25.0]))
        .with("cost", ParamValue::from_rows(vec![vec![4.0, 6.0, 9.0], vec![5.0, 3.0, 7.0]]));
    let decl = DecisionVariableDecl::new("ship", VarKind::Continuous).indexed("for i in range(2) for j in range(3)");
    let vars = VarTable::build(&[decl], &params)?;

    let rel = parse_relation("sum(cost[i, j] * ship[i, j] for j in range(3)) <= supply[i] for i in range(2)")?;
    println!("parsed: {rel}");
    for row in ground(&rel, &params)? {
        // Everything moves to the left: lhs - rhs <op> 0.
        let form = relation_to_linear(&row, &params, &vars)?;
        let terms: Vec<String> = form.coefficients.iter().map(|(v, c)| format!("{c}*{v}")).collect();
        println!("  {row}");
        println!("    => {} {:+} {} 0", terms.join(" + "), form.constant, row.op.symbol());
    }
    Ok(())
}
