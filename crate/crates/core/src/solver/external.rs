use std::time::Instant;

use microlp::{ComparisonOp, Error, OptimizationDirection, Problem};

use super::{finish, Column, ComputationalModel, SolveLimits, SolveResult, SolverBackend, Status};
use crate::expr::RelOp;
use crate::model::{Sense, VarKind};

/// Adapter over the `microlp` crate. Integer bounds beyond `i32` are clamped.
#[derive(Debug, Clone, Copy, Default)]
pub struct MicroLpSolver;

impl SolverBackend for MicroLpSolver {
    fn name(&self) -> &'static str {
        "microlp"
    }

    fn solve(&self, model: &ComputationalModel, _limits: &SolveLimits) -> SolveResult {
        let started = Instant::now();
        let direction = match model.objective.sense {
            Sense::Min => OptimizationDirection::Minimize,
            Sense::Max => OptimizationDirection::Maximize,
        };
        let mut p = Problem::new(direction);
        let as_int = |v: f64| v.clamp(i32::MIN as f64, i32::MAX as f64) as i32;
        let vars: Vec<_> = model
            .columns
            .iter()
            .zip(&model.objective.coefficients)
            .map(|(c, &obj): (&Column, &f64)| match c.kind {
                VarKind::Continuous => p.add_var(obj, (c.lower_value(), c.upper_value())),
                VarKind::Integer | VarKind::Binary => {
                    p.add_integer_var(obj, (as_int(c.lower_value().ceil()), as_int(c.upper_value().floor())))
                }
            })
            .collect();
        for row in &model.rows {
            let terms: Vec<_> = row.coefficients.iter().map(|&(j, c)| (vars[j], c)).collect();
            let op = match row.op {
                RelOp::Le => ComparisonOp::Le,
                RelOp::Ge => ComparisonOp::Ge,
                RelOp::Eq => ComparisonOp::Eq,
            };
            p.add_constraint(terms.as_slice(), op, row.rhs);
        }
        let stopped = |status| SolveResult { status, objective_value: None, assignment: None, solve_time: started.elapsed().as_secs_f64() };
        match p.solve() {
            Ok(outcome) => match outcome.solution() {
                Some(sol) => {
                    let mut x: Vec<f64> = vars.iter().map(|v| sol.var_value(*v)).collect();
                    for (v, c) in x.iter_mut().zip(&model.columns) {
                        if c.kind.is_integral() {
                            *v = v.round();
                        }
                    }
                    finish(model, x, started)
                }
                None => stopped(Status::IterationLimit),
            },
            Err(Error::Infeasible) => stopped(Status::Infeasible),
            Err(Error::Unbounded) => stopped(Status::Unbounded),
            Err(e) => stopped(Status::Error(e.to_string())),
        }
    }
}
