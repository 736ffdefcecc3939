//! Lowering of complete formulations into LP/MILP models, and solving them.
//!
//! The builtin backend is a bounded-variable primal simplex with best-first
//! branch and bound on integral columns. `MicroLpSolver` wraps the `microlp`
//! crate behind the same interface for cross-checks.

mod bnb;
mod external;
mod lowering;
mod lpfile;
mod simplex;

use std::time::Instant;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::expr::RelOp;
use crate::model::Sense;

pub use external::MicroLpSolver;
pub use lowering::{constraint_rows, lower, objective_form, variable_table, Column, ComputationalModel, LoweringError, ModelObjective};
pub use lpfile::{lp_name, to_lp_string};

pub(crate) use bnb::branch_and_bound;
pub(crate) use simplex::{solve_lp, LpOutcome};

pub const OPTIMALITY_TOL: f64 = simplex::OPT_TOL;
pub const INTEGRALITY_TOL: f64 = bnb::INTEGRALITY_TOL;

/// `Σ coefficient·x[column] op rhs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub coefficients: Vec<(usize, f64)>,
    pub op: RelOp,
    pub rhs: f64,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
    Error(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveLimits {
    /// Simplex iterations per LP relaxation.
    pub max_lp_iterations: usize,
    /// Branch-and-bound nodes.
    pub max_nodes: usize,
}

impl Default for SolveLimits {
    fn default() -> Self {
        SolveLimits { max_lp_iterations: 50_000, max_nodes: 20_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub status: Status,
    pub objective_value: Option<f64>,
    pub assignment: Option<IndexMap<String, f64>>,
    /// Wall-clock seconds; never serialized so that run records stay
    /// byte-stable.
    #[serde(skip)]
    pub solve_time: f64,
}

impl SolveResult {
    fn stopped(status: Status, started: Instant) -> SolveResult {
        SolveResult { status, objective_value: None, assignment: None, solve_time: started.elapsed().as_secs_f64() }
    }

    /// Assignment values in column order.
    pub fn values(&self) -> Option<Vec<f64>> {
        self.assignment.as_ref().map(|a| a.values().copied().collect())
    }
}

pub trait SolverBackend: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, model: &ComputationalModel, limits: &SolveLimits) -> SolveResult;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct BuiltinSolver;

impl SolverBackend for BuiltinSolver {
    fn name(&self) -> &'static str {
        "builtin"
    }

    fn solve(&self, model: &ComputationalModel, limits: &SolveLimits) -> SolveResult {
        let started = Instant::now();
        let flip = if model.objective.sense == Sense::Max { -1.0 } else { 1.0 };
        let cost: Vec<f64> = model.objective.coefficients.iter().map(|c| flip * c).collect();
        let lower: Vec<f64> = model.columns.iter().map(Column::lower_value).collect();
        let upper: Vec<f64> = model.columns.iter().map(Column::upper_value).collect();
        let integral: Vec<bool> = model.columns.iter().map(|c| c.kind.is_integral()).collect();

        let outcome = if integral.iter().any(|&b| b) {
            bnb::branch_and_bound(&cost, &model.rows, &lower, &upper, &integral, limits)
        } else {
            solve_lp(&cost, &model.rows, &lower, &upper, limits.max_lp_iterations).0
        };
        match outcome {
            LpOutcome::Optimal { mut x, .. } => {
                for (v, &int) in x.iter_mut().zip(&integral) {
                    if int {
                        *v = v.round();
                    }
                }
                finish(model, x, started)
            }
            LpOutcome::Stopped(status) => SolveResult::stopped(status, started),
        }
    }
}

fn finish(model: &ComputationalModel, x: Vec<f64>, started: Instant) -> SolveResult {
    let objective = model.objective_value(&x);
    let assignment = model.columns.iter().zip(&x).map(|(c, v)| (c.name.clone(), *v)).collect();
    SolveResult { status: Status::Optimal, objective_value: Some(objective), assignment: Some(assignment), solve_time: started.elapsed().as_secs_f64() }
}

/// Solves with the builtin backend.
pub fn solve(model: &ComputationalModel, limits: &SolveLimits) -> SolveResult {
    BuiltinSolver.solve(model, limits)
}

/// The solver term of the reward: 1 iff the status is `Optimal`.
pub fn solver_indicator(r: &SolveResult) -> u8 {
    u8::from(r.status == Status::Optimal)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverKind {
    #[default]
    Builtin,
    Microlp,
}

impl SolverKind {
    pub fn backend(self) -> Box<dyn SolverBackend> {
        match self {
            SolverKind::Builtin => Box::new(BuiltinSolver),
            SolverKind::Microlp => Box::new(MicroLpSolver),
        }
    }
}
