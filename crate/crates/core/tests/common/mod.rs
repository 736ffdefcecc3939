//! Independent oracles and fixtures shared by the integration tests. Nothing
//! here calls the simplex, branch and bound or equivalence code under test.

#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::Arc;

use autoformulate::expr::RelOp;
use autoformulate::gateway::{GeneratorBackend, ScriptedBackend};
use autoformulate::harness::{load_dataset, run_dataset, ProblemRun, RunConfig};
use autoformulate::model::{
    Component, ConstraintKind, ConstraintSet, DecisionVariableDecl, ObjectiveSpec, ParamValue, ParameterTable, PartialFormulation, ProblemDescription, Sense, VarKind,
};
use autoformulate::solver::{Column, ComputationalModel, ModelObjective, Row};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/micro_benchmark")
}

pub fn micro_config() -> RunConfig {
    RunConfig::load(&data_dir().join("config.toml")).expect("bundled config")
}

pub fn micro_dataset() -> Vec<ProblemDescription> {
    load_dataset(&data_dir().join("dataset.jsonl")).expect("bundled dataset")
}

pub fn scripted() -> Arc<dyn GeneratorBackend> {
    Arc::new(ScriptedBackend::from_file(&data_dir().join("fixtures.jsonl")).expect("bundled fixtures"))
}

/// The bundled micro-benchmark replayed from fixtures.
pub fn micro_runs() -> Vec<ProblemRun> {
    run_dataset(&micro_dataset(), &micro_config(), scripted())
}

// ---------------------------------------------------------------------------
// Dense LP/MILP instances

#[derive(Debug, Clone)]
pub struct DenseProblem {
    pub sense: Sense,
    pub cost: Vec<f64>,
    pub rows: Vec<(Vec<f64>, RelOp, f64)>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl DenseProblem {
    pub fn n(&self) -> usize {
        self.cost.len()
    }

    pub fn model(&self, kind: VarKind) -> ComputationalModel {
        let columns = (0..self.n()).map(|j| Column { name: format!("x{j}"), kind, lower: Some(self.lower[j]), upper: Some(self.upper[j]) }).collect();
        let rows = self
            .rows
            .iter()
            .map(|(a, op, b)| Row { coefficients: a.iter().copied().enumerate().filter(|(_, c)| *c != 0.0).collect(), op: *op, rhs: *b, source: String::new() })
            .collect();
        ComputationalModel { columns, objective: ModelObjective { sense: self.sense, coefficients: self.cost.clone(), constant: 0.0 }, rows }
    }

    pub fn feasible(&self, x: &[f64], tol: f64) -> bool {
        let in_box = x.iter().enumerate().all(|(j, &v)| v >= self.lower[j] - tol && v <= self.upper[j] + tol);
        in_box && self.rows.iter().all(|(a, op, b)| holds(dot(a, x), *op, *b, tol))
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        dot(&self.cost, x)
    }

    fn better(&self, a: f64, b: f64) -> bool {
        match self.sense {
            Sense::Min => a < b,
            Sense::Max => a > b,
        }
    }
}

pub fn dot(a: &[f64], x: &[f64]) -> f64 {
    a.iter().zip(x).map(|(a, x)| a * x).sum()
}

pub fn holds(lhs: f64, op: RelOp, rhs: f64, tol: f64) -> bool {
    match op {
        RelOp::Le => lhs <= rhs + tol,
        RelOp::Ge => lhs >= rhs - tol,
        RelOp::Eq => (lhs - rhs).abs() <= tol,
    }
}

/// Gaussian elimination with partial pivoting; `None` when singular.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-10 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let pivot = a[col].clone();
                let f = a[r][col] / pivot[col];
                for (v, p) in a[r].iter_mut().zip(&pivot).skip(col) {
                    *v -= f * p;
                }
                b[r] -= f * b[col];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn go(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            go(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    go(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Optimum of a bounded LP by enumerating every basic solution: each choice
/// of `n` tight hyperplanes among rows and box faces.
pub fn vertex_enumeration(p: &DenseProblem) -> Option<f64> {
    let n = p.n();
    let mut planes: Vec<(Vec<f64>, f64)> = p.rows.iter().map(|(a, _, b)| (a.clone(), *b)).collect();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), p.lower[j]));
        planes.push((e, p.upper[j]));
    }
    let mut best: Option<f64> = None;
    for combo in combinations(planes.len(), n) {
        let a = combo.iter().map(|&i| planes[i].0.clone()).collect();
        let b = combo.iter().map(|&i| planes[i].1).collect();
        if let Some(x) = solve_dense(a, b) {
            if p.feasible(&x, 1e-7) {
                let v = p.objective(&x);
                if best.is_none_or(|b| p.better(v, b)) {
                    best = Some(v);
                }
            }
        }
    }
    best
}

/// Optimum over the integer points of the box by exhaustive search.
pub fn lattice_brute_force(p: &DenseProblem) -> Option<f64> {
    let n = p.n();
    let lo: Vec<i64> = p.lower.iter().map(|v| v.ceil() as i64).collect();
    let hi: Vec<i64> = p.upper.iter().map(|v| v.floor() as i64).collect();
    let mut x = lo.clone();
    let mut best: Option<f64> = None;
    loop {
        let xf: Vec<f64> = x.iter().map(|&v| v as f64).collect();
        if p.feasible(&xf, 1e-9) {
            let v = p.objective(&xf);
            if best.is_none_or(|b| p.better(v, b)) {
                best = Some(v);
            }
        }
        let mut k = 0;
        loop {
            if k == n {
                return best;
            }
            if x[k] < hi[k] {
                x[k] += 1;
                break;
            }
            x[k] = lo[k];
            k += 1;
        }
    }
}

// ---------------------------------------------------------------------------
// Linear systems on a grid

/// `Σ a·x op b` over variables named x, y, z.
#[derive(Debug, Clone, PartialEq)]
pub struct LinRel {
    pub a: Vec<f64>,
    pub op: RelOp,
    pub b: f64,
}

pub const NAMES: [&str; 3] = ["x", "y", "z"];

impl LinRel {
    pub fn text(&self) -> String {
        let terms: Vec<String> = self.a.iter().zip(NAMES).filter(|(c, _)| **c != 0.0).map(|(c, v)| format!("({c})*{v}")).collect();
        let lhs = if terms.is_empty() { "0".to_string() } else { terms.join(" + ") };
        let op = match self.op {
            RelOp::Le => "<=",
            RelOp::Ge => ">=",
            RelOp::Eq => "==",
        };
        format!("{lhs} {op} {}", self.b)
    }

    pub fn holds_at(&self, x: &[f64]) -> bool {
        holds(dot(&self.a, x), self.op, self.b, 1e-9)
    }
}

/// Grid points of `[-5, 5]^n` at step 0.25.
pub fn grid(n: usize) -> Vec<Vec<f64>> {
    let axis: Vec<f64> = (0..=40).map(|k| -5.0 + 0.25 * k as f64).collect();
    let mut pts = vec![Vec::new()];
    for _ in 0..n {
        pts = pts.into_iter().flat_map(|p| axis.iter().map(move |&v| [p.clone(), vec![v]].concat())).collect();
    }
    pts
}

/// Whether two systems select the same grid points.
pub fn grid_agrees(s1: &[LinRel], s2: &[LinRel], pts: &[Vec<f64>]) -> bool {
    pts.iter().all(|x| s1.iter().all(|r| r.holds_at(x)) == s2.iter().all(|r| r.holds_at(x)))
}

/// Continuous variables x, y, z (first `n`) boxed to `[-5, 5]`.
pub fn boxed_variables(n: usize) -> Vec<DecisionVariableDecl> {
    NAMES[..n].iter().map(|v| DecisionVariableDecl::new(*v, VarKind::Continuous).bounds(-5.0, Some(5.0))).collect()
}

pub fn constraint_set(kind: ConstraintKind, rels: &[LinRel]) -> ConstraintSet {
    ConstraintSet::from_pairs(kind, rels.iter().enumerate().map(|(i, r)| (format!("c{i}"), r.text())))
}

// ---------------------------------------------------------------------------
// Duplicate-heavy pruning fixture

pub struct PruneStage {
    pub stage: u8,
    pub context: PartialFormulation,
    pub candidates: Vec<Component>,
    pub true_classes: usize,
}

fn set(kind: ConstraintKind, entries: &[&str]) -> ConstraintSet {
    ConstraintSet::from_pairs(kind, entries.iter().enumerate().map(|(i, e)| (format!("c{i}"), e.to_string())))
}

/// Ten candidates per stage drawn from two to four true classes, written
/// the way a sampler tends to repeat itself: reordered terms, scalings,
/// moved constants, redundant rows.
pub fn duplicate_heavy() -> Vec<PruneStage> {
    let parameters = ParameterTable::new().with("cap", ParamValue::Scalar(3.0));
    let variables: Vec<DecisionVariableDecl> = NAMES.iter().map(|v| DecisionVariableDecl::new(*v, VarKind::Continuous).bounds(0.0, Some(10.0))).collect();
    let mut ctx = PartialFormulation::root();
    ctx.push(Component::Variables { parameters, variables }).unwrap();

    let obj = |s: &str| Component::Objective(ObjectiveSpec::new(Sense::Max, s));
    let objectives = vec![
        obj("3*x + 2*y"),
        obj("x + y + z"),
        obj("2*y + 3*x"),
        obj("4*z - y"),
        obj("x + x + x + 2*y"),
        obj("z + y + x"),
        obj("-y + 4*z"),
        obj("(6*x + 4*y)/2"),
        obj("2*(x + y + z)/2"),
        obj("4*z - y + 0*x"),
    ];
    let stage2 = PruneStage { stage: 2, context: ctx.clone(), candidates: objectives.clone(), true_classes: 3 };

    let mut ctx3 = ctx.clone();
    ctx3.push(objectives[0].clone()).unwrap();
    let eq = |e: &[&str]| Component::Equalities(set(ConstraintKind::Equality, e));
    let equalities = vec![
        eq(&["x + y == 4"]),
        eq(&["z == 1", "x + y == 4"]),
        eq(&["2*x + 2*y == 8"]),
        eq(&["x - y == 0"]),
        eq(&["y + x == 4", "2*z == 2"]),
        eq(&["-x - y == -4"]),
        eq(&["y == x"]),
        eq(&["x == 4 - y"]),
        eq(&["x + y == 4", "z == 1", "x + y + z == 5"]),
        eq(&["2*x - 2*y == 0"]),
    ];
    let stage3 = PruneStage { stage: 3, context: ctx3.clone(), candidates: equalities, true_classes: 3 };

    let mut ctx4 = ctx3.clone();
    ctx4.push(eq(&["z == 1"])).unwrap();
    let le = |e: &[&str]| Component::Inequalities(set(ConstraintKind::Inequality, e));
    let inequalities = vec![
        le(&["x <= cap"]),
        le(&["x <= 3", "y <= 2"]),
        le(&["y >= 1"]),
        le(&["2*x <= 6"]),
        le(&["x + y <= 2"]),
        le(&["y <= 2", "x <= cap"]),
        le(&["-y <= -1"]),
        le(&["x + z <= 4"]),
        le(&["x <= 3", "y <= 2", "x + y <= 5"]),
        le(&["2*x + 2*y <= 4"]),
    ];
    let stage4 = PruneStage { stage: 4, context: ctx4, candidates: inequalities, true_classes: 4 };
    vec![stage2, stage3, stage4]
}
