//! CPLEX LP text export for cross-checking against external solvers.

use std::fmt::Write;

use super::ComputationalModel;
use crate::expr::RelOp;
use crate::model::{Sense, VarKind};

/// LP-format names may not contain brackets or spaces; `x[0,1]` becomes
/// `x(0,1)` and anything else outside the allowed set becomes `_`.
pub fn lp_name(name: &str) -> String {
    name.chars()
        .map(|c| match c {
            '[' => '(',
            ']' => ')',
            c if c.is_ascii_alphanumeric() || "!\"#$%&()/,.;?@_`'{}|~".contains(c) => c,
            _ => '_',
        })
        .collect()
}

fn number(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v:?}")
    }
}

fn terms(out: &mut String, names: &[String], coefficients: impl Iterator<Item = (usize, f64)>) {
    let mut first = true;
    for (j, c) in coefficients {
        if c == 0.0 {
            continue;
        }
        let sign = if c < 0.0 { "-" } else { "+" };
        if first {
            if c < 0.0 {
                out.push_str(" -");
            }
        } else {
            let _ = write!(out, " {sign}");
        }
        let _ = write!(out, " {} {}", number(c.abs()), names[j]);
        first = false;
    }
    if first {
        out.push_str(" 0");
    }
}

pub fn to_lp_string(model: &ComputationalModel) -> String {
    let names: Vec<String> = model.columns.iter().map(|c| lp_name(&c.name)).collect();
    let mut out = String::new();
    out.push_str(match model.objective.sense {
        Sense::Min => "Minimize\n",
        Sense::Max => "Maximize\n",
    });
    out.push_str(" obj:");
    terms(&mut out, &names, model.objective.coefficients.iter().copied().enumerate());
    let k = model.objective.constant;
    if k != 0.0 {
        let _ = write!(out, " {} {}", if k < 0.0 { "-" } else { "+" }, number(k.abs()));
    }
    out.push_str("\nSubject To\n");
    for (i, row) in model.rows.iter().enumerate() {
        let _ = write!(out, " r{}_{}:", i, lp_name(&row.source));
        terms(&mut out, &names, row.coefficients.iter().copied());
        let op = match row.op {
            RelOp::Le => "<=",
            RelOp::Ge => ">=",
            RelOp::Eq => "=",
        };
        let _ = writeln!(out, " {op} {}", number(row.rhs));
    }
    out.push_str("Bounds\n");
    for (c, name) in model.columns.iter().zip(&names) {
        if c.kind == VarKind::Binary {
            continue;
        }
        match (c.lower, c.upper) {
            (None, None) => {
                let _ = writeln!(out, " {name} free");
            }
            (Some(l), None) => {
                let _ = writeln!(out, " {name} >= {}", number(l));
            }
            (None, Some(u)) => {
                let _ = writeln!(out, " -inf <= {name} <= {}", number(u));
            }
            (Some(l), Some(u)) => {
                let _ = writeln!(out, " {} <= {name} <= {}", number(l), number(u));
            }
        }
    }
    for (label, kind) in [("General", VarKind::Integer), ("Binary", VarKind::Binary)] {
        let members: Vec<&str> = model.columns.iter().zip(&names).filter(|(c, _)| c.kind == kind).map(|(_, n)| n.as_str()).collect();
        if !members.is_empty() {
            let _ = writeln!(out, "{label}\n {}", members.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{Column, ModelObjective, Row};

    #[test]
    fn writes_sections() {
        let m = ComputationalModel {
            columns: vec![
                Column { name: "x[0]".into(), kind: VarKind::Continuous, lower: Some(0.0), upper: None },
                Column { name: "y".into(), kind: VarKind::Integer, lower: Some(0.0), upper: Some(10.0) },
                Column { name: "z".into(), kind: VarKind::Binary, lower: Some(0.0), upper: Some(1.0) },
            ],
            objective: ModelObjective { sense: Sense::Max, coefficients: vec![3.0, -2.5, 0.0], constant: 1.0 },
            rows: vec![Row { coefficients: vec![(0, 1.0), (1, 1.0)], op: RelOp::Le, rhs: 4.0, source: "inequality_constraints.total cap".into() }],
        };
        let text = to_lp_string(&m);
        assert_eq!(
            text,
            "Maximize\n obj: 3 x(0) - 2.5 y + 1\nSubject To\n r0_inequality_constraints.total_cap: 1 x(0) + 1 y <= 4\n\
             Bounds\n x(0) >= 0\n 0 <= y <= 10\nGeneral\n y\nBinary\n z\nEnd\n"
        );
    }
}
