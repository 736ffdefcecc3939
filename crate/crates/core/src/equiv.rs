//! Trivial-equivalence detection between candidate components.
//!
//! Objectives are compared as affine functions. Constraint systems go through
//! three tiers: identical canonical forms; mutual implication on the
//! continuous relaxation, decided by LPs that maximize each relation's
//! violation; and, when integral columns are involved and the relaxation
//! disagrees, a lattice re-check by branch and bound. Anything undecided is
//! `Unknown`, which pruning treats as distinct.

use std::cmp::Ordering;
use std::collections::HashMap;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{LinearForm, RelOp, VarInstance, VarTable};
use crate::model::{Component, ConstraintKind, ConstraintSet, Formulation, ParameterTable, PartialFormulation, Sense};
use crate::solver::{self, constraint_rows, objective_form, variable_table, LpOutcome, Row, SolveLimits, Status};

/// Absolute tolerance for comparing canonical coefficients.
pub const COEFF_TOL: f64 = 1e-9;
/// A relation counts as violated only beyond this margin.
pub const VIOLATION_TOL: f64 = 1e-7;
/// Margin demanded of lattice witnesses; well above the integrality
/// tolerance so a rounded witness still violates.
const LATTICE_MARGIN: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum EquivVerdict {
    Equivalent,
    /// `witness` satisfies exactly one side (or separates the objectives).
    Distinct { witness: IndexMap<String, f64> },
    Unknown { reason: String },
}

impl EquivVerdict {
    pub fn is_equivalent(&self) -> bool {
        matches!(self, EquivVerdict::Equivalent)
    }

    fn unknown(reason: impl Into<String>) -> Self {
        EquivVerdict::Unknown { reason: reason.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EquivError {
    #[error("variable tables differ: {0}")]
    DomainMismatch(String),
}

/// `Σ coefficient·x op rhs` with `op` either `<=` or `==`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CanonicalRelation {
    pub coefficients: Vec<(VarInstance, f64)>,
    pub op: RelOp,
    pub rhs: f64,
}

impl CanonicalRelation {
    /// Normalizes `form op 0`. Returns `None` for a constant relation that
    /// always holds; a constant relation that never holds becomes `0 <= -1`.
    pub fn new(form: &LinearForm, op: RelOp) -> Option<CanonicalRelation> {
        let (mut coefficients, mut rhs): (Vec<(VarInstance, f64)>, f64) =
            (form.coefficients.iter().filter(|(_, c)| c.abs() >= crate::expr::COEFF_EPS).map(|(v, c)| (v.clone(), *c)).collect(), -form.constant);
        let mut op = op;
        if op == RelOp::Ge {
            coefficients.iter_mut().for_each(|(_, c)| *c = -*c);
            rhs = -rhs;
            op = RelOp::Le;
        }
        let Some(&(_, lead)) = coefficients.first() else {
            let holds = match op {
                RelOp::Eq => rhs.abs() <= COEFF_TOL,
                _ => rhs >= -COEFF_TOL,
            };
            return (!holds).then(|| CanonicalRelation { coefficients: Vec::new(), op: RelOp::Le, rhs: -1.0 });
        };
        // Equalities are scaled to a +1 leading coefficient; inequalities only
        // by its magnitude, since a negative factor would flip the relation.
        let scale = if op == RelOp::Eq { lead } else { lead.abs() };
        for (_, c) in coefficients.iter_mut() {
            *c /= scale;
        }
        rhs /= scale;
        Some(CanonicalRelation { coefficients, op, rhs })
    }

    pub fn form(&self) -> (LinearForm, RelOp) {
        let form = LinearForm { coefficients: self.coefficients.iter().cloned().collect(), constant: -self.rhs };
        (form, self.op)
    }

    fn total_cmp(&self, other: &Self) -> Ordering {
        let key = |r: &CanonicalRelation| u8::from(r.op == RelOp::Le);
        key(self)
            .cmp(&key(other))
            .then_with(|| {
                let a = self.coefficients.iter().map(|(v, _)| v);
                a.cmp(other.coefficients.iter().map(|(v, _)| v))
            })
            .then_with(|| {
                for ((_, a), (_, b)) in self.coefficients.iter().zip(&other.coefficients) {
                    match a.total_cmp(b) {
                        Ordering::Equal => {}
                        o => return o,
                    }
                }
                Ordering::Equal
            })
            .then_with(|| self.rhs.total_cmp(&other.rhs))
    }

    fn approx_eq(&self, other: &Self) -> bool {
        self.op == other.op
            && (self.rhs - other.rhs).abs() <= COEFF_TOL
            && self.coefficients.len() == other.coefficients.len()
            && self.coefficients.iter().zip(&other.coefficients).all(|((va, a), (vb, b))| va == vb && (a - b).abs() <= COEFF_TOL)
    }
}

/// A sorted, deduplicated list of canonical relations.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct CanonicalSystem {
    pub relations: Vec<CanonicalRelation>,
}

impl CanonicalSystem {
    pub fn new<'a>(relations: impl IntoIterator<Item = (&'a LinearForm, RelOp)>) -> CanonicalSystem {
        let mut rels: Vec<CanonicalRelation> = relations.into_iter().filter_map(|(f, op)| CanonicalRelation::new(f, op)).collect();
        rels.sort_by(CanonicalRelation::total_cmp);
        rels.dedup_by(|b, a| a.approx_eq(b));
        CanonicalSystem { relations: rels }
    }

    pub fn canonical(&self) -> CanonicalSystem {
        let forms: Vec<(LinearForm, RelOp)> = self.relations.iter().map(CanonicalRelation::form).collect();
        CanonicalSystem::new(forms.iter().map(|(f, op)| (f, *op)))
    }

    pub fn identical(&self, other: &CanonicalSystem) -> bool {
        self.relations.len() == other.relations.len() && self.relations.iter().zip(&other.relations).all(|(a, b)| a.approx_eq(b))
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    /// Truth of the system at `x`, with relations read at tolerance `tol`.
    pub fn satisfied_by(&self, x: &HashMap<VarInstance, f64>, tol: f64) -> bool {
        self.relations.iter().all(|r| {
            let lhs: f64 = r.coefficients.iter().map(|(v, c)| c * x.get(v).copied().unwrap_or(0.0)).sum();
            r.op.holds(lhs, r.rhs, tol)
        })
    }
}

/// The box `𝒳` from declared bounds, plus relations every candidate shares
/// (the equalities already fixed above an inequality stage).
#[derive(Debug, Clone)]
pub struct Domain {
    instances: Vec<VarInstance>,
    index: HashMap<VarInstance, usize>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    integral: Vec<bool>,
    context: Vec<CanonicalRelation>,
}

impl Domain {
    pub fn new(vars: &VarTable) -> Domain {
        let mut d = Domain { instances: Vec::new(), index: HashMap::new(), lower: Vec::new(), upper: Vec::new(), integral: Vec::new(), context: Vec::new() };
        for (inst, info) in vars.instances() {
            d.index.insert(inst.clone(), d.instances.len());
            d.instances.push(inst);
            d.lower.push(info.lower);
            d.upper.push(info.upper);
            d.integral.push(info.kind.is_integral());
        }
        d
    }

    pub fn with_context(mut self, context: &CanonicalSystem) -> Domain {
        self.context = context.relations.clone();
        self
    }

    pub fn has_integral(&self) -> bool {
        self.integral.iter().any(|&b| b)
    }

    /// The point of the box closest to the origin.
    fn base_point(&self) -> Vec<f64> {
        self.lower.iter().zip(&self.upper).map(|(l, u)| 0.0f64.clamp(*l, *u)).collect()
    }

    fn named(&self, x: &[f64]) -> IndexMap<String, f64> {
        self.instances.iter().zip(x).map(|(v, x)| (v.to_string(), *x)).collect()
    }

    fn row(&self, r: &CanonicalRelation) -> Result<Row, EquivError> {
        let coefficients = r
            .coefficients
            .iter()
            .map(|(v, c)| self.index.get(v).map(|&j| (j, *c)).ok_or_else(|| EquivError::DomainMismatch(format!("{v} is not declared"))))
            .collect::<Result<_, _>>()?;
        Ok(Row { coefficients, op: r.op, rhs: r.rhs, source: String::new() })
    }

    fn rows(&self, s: &CanonicalSystem) -> Result<Vec<Row>, EquivError> {
        self.context.iter().chain(&s.relations).map(|r| self.row(r)).collect()
    }
}

// ---------------------------------------------------------------------------
// Objectives

/// Pointwise equality of two affine objectives over the domain. Senses are
/// the caller's concern.
pub fn check_objective_equivalence(f1: &LinearForm, f2: &LinearForm, domain: &Domain) -> Result<EquivVerdict, EquivError> {
    for v in f1.coefficients.keys().chain(f2.coefficients.keys()) {
        if !domain.index.contains_key(v) {
            return Err(EquivError::DomainMismatch(format!("{v} is not declared")));
        }
    }
    let differing = domain.instances.iter().position(|v| (f1.coefficient(v) - f2.coefficient(v)).abs() > COEFF_TOL);
    if differing.is_none() && (f1.constant - f2.constant).abs() <= COEFF_TOL {
        return Ok(EquivVerdict::Equivalent);
    }
    let mut x = domain.base_point();
    let value = |f: &LinearForm, x: &[f64]| f.constant + domain.instances.iter().zip(x).map(|(v, x)| f.coefficient(v) * x).sum::<f64>();
    if (value(f1, &x) - value(f2, &x)).abs() <= COEFF_TOL {
        let j = differing.expect("constants agree at the base point only if some coefficient differs");
        x[j] += if x[j] + 1.0 <= domain.upper[j] { 1.0 } else { -1.0 };
    }
    Ok(EquivVerdict::Distinct { witness: domain.named(&x) })
}

// ---------------------------------------------------------------------------
// Constraint systems

enum Implication {
    Holds,
    Violated(Vec<f64>),
}

fn negate(coefficients: &[(usize, f64)]) -> Vec<(usize, f64)> {
    coefficients.iter().map(|&(j, c)| (j, -c)).collect()
}

/// Does every point of `from` (within the domain) satisfy `to`? On the
/// relaxation this maximizes each half-space's activity, capped one unit past
/// its bound so the LP stays bounded and the witness clearly violates. On the
/// lattice it asks for an integral point violating by `LATTICE_MARGIN`.
fn implies(from: &CanonicalSystem, to: &CanonicalSystem, domain: &Domain, lattice: bool) -> Result<Result<Implication, String>, EquivError> {
    let base = domain.rows(from)?;
    let n = domain.instances.len();
    let limits = SolveLimits::default();
    for r in &to.relations {
        let row = domain.row(r)?;
        let mut halves = vec![(row.coefficients.clone(), row.rhs)];
        if r.op == RelOp::Eq {
            halves.push((negate(&row.coefficients), -row.rhs));
        }
        for (a, b) in halves {
            let mut rows = base.clone();
            let mut cost = vec![0.0; n];
            if lattice {
                for &(j, c) in &a {
                    cost[j] = c;
                }
                rows.push(Row { coefficients: a.clone(), op: RelOp::Ge, rhs: b + LATTICE_MARGIN, source: String::new() });
            } else {
                for &(j, c) in &a {
                    cost[j] = -c;
                }
                if !a.is_empty() {
                    rows.push(Row { coefficients: a.clone(), op: RelOp::Le, rhs: b + 1.0, source: String::new() });
                }
            }
            let outcome = if lattice {
                solver::branch_and_bound(&cost, &rows, &domain.lower, &domain.upper, &domain.integral, &limits)
            } else {
                solver::solve_lp(&cost, &rows, &domain.lower, &domain.upper, limits.max_lp_iterations).0
            };
            match outcome {
                LpOutcome::Optimal { mut x, .. } => {
                    if lattice {
                        for (v, &int) in x.iter_mut().zip(&domain.integral) {
                            if int {
                                *v = v.round();
                            }
                        }
                    }
                    let activity: f64 = a.iter().map(|&(j, c)| c * x[j]).sum();
                    if activity > b + VIOLATION_TOL {
                        return Ok(Ok(Implication::Violated(x)));
                    }
                    if lattice {
                        return Ok(Err("lattice witness did not survive rounding".into()));
                    }
                }
                // On the lattice: no point violates this half-space. On the
                // relaxation either `from` is empty, so it implies anything,
                // or the cap cut off all of it, so every point violates.
                LpOutcome::Stopped(Status::Infeasible) => {
                    if !lattice {
                        return match solver::solve_lp(&vec![0.0; n], &base, &domain.lower, &domain.upper, limits.max_lp_iterations).0 {
                            LpOutcome::Optimal { x, .. } => Ok(Ok(Implication::Violated(x))),
                            LpOutcome::Stopped(Status::Infeasible) => Ok(Ok(Implication::Holds)),
                            LpOutcome::Stopped(other) => Ok(Err(format!("implication check stopped: {other:?}"))),
                        };
                    }
                }
                LpOutcome::Stopped(other) => return Ok(Err(format!("implication check stopped: {other:?}"))),
            }
        }
    }
    Ok(Ok(Implication::Holds))
}

fn mutual(s1: &CanonicalSystem, s2: &CanonicalSystem, domain: &Domain, lattice: bool) -> Result<EquivVerdict, EquivError> {
    for (a, b) in [(s1, s2), (s2, s1)] {
        match implies(a, b, domain, lattice)? {
            Ok(Implication::Holds) => {}
            Ok(Implication::Violated(x)) => return Ok(EquivVerdict::Distinct { witness: domain.named(&x) }),
            Err(reason) => return Ok(EquivVerdict::unknown(reason)),
        }
    }
    Ok(EquivVerdict::Equivalent)
}

pub fn check_system_equivalence(s1: &CanonicalSystem, s2: &CanonicalSystem, kind: ConstraintKind, domain: &Domain) -> Result<EquivVerdict, EquivError> {
    if kind == ConstraintKind::Equality {
        let stray = s1.relations.iter().chain(&s2.relations).any(|r| r.op != RelOp::Eq && !r.coefficients.is_empty());
        if stray {
            return Ok(EquivVerdict::unknown("inequality relation in an equality set"));
        }
    }
    if s1.identical(s2) {
        // Still surface undeclared instances.
        domain.rows(s1)?;
        return Ok(EquivVerdict::Equivalent);
    }
    let relaxed = mutual(s1, s2, domain, false)?;
    let EquivVerdict::Distinct { witness } = &relaxed else { return Ok(relaxed) };
    if !domain.has_integral() {
        return Ok(relaxed);
    }
    // Equal relaxations have equal lattices, so only a relaxed Distinct needs
    // a second look: it stands if its witness is already a lattice point.
    let on_lattice = domain.instances.iter().zip(&domain.integral).all(|(v, &int)| {
        let x = witness[&v.to_string()];
        !int || (x - x.round()).abs() <= solver::INTEGRALITY_TOL
    });
    if on_lattice {
        return Ok(relaxed);
    }
    match mutual(s1, s2, domain, true)? {
        EquivVerdict::Equivalent => Ok(EquivVerdict::unknown("relaxations differ but no lattice point separates them")),
        other => Ok(other),
    }
}

// ---------------------------------------------------------------------------
// Whole formulations

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FormulationVerdict {
    pub objective: EquivVerdict,
    pub equalities: EquivVerdict,
    pub inequalities: EquivVerdict,
}

impl FormulationVerdict {
    pub fn all_equivalent(&self) -> bool {
        self.objective.is_equivalent() && self.equalities.is_equivalent() && self.inequalities.is_equivalent()
    }
}

fn system_of(set: &ConstraintSet, params: &ParameterTable, vars: &VarTable) -> Result<CanonicalSystem, String> {
    let component = match set.kind {
        ConstraintKind::Equality => "equality_constraints",
        ConstraintKind::Inequality => "inequality_constraints",
    };
    let rows = constraint_rows(set, params, vars, component).map_err(|e| e.to_string())?;
    Ok(CanonicalSystem::new(rows.iter().map(|(f, op, _)| (f, *op))))
}

/// Compares objective, equality, and inequality components of two complete
/// formulations over the same variables. Inequalities are compared in the
/// presence of the equalities when those agree.
pub fn check_formulations(a: &Formulation, b: &Formulation) -> Result<FormulationVerdict, EquivError> {
    let va = variable_table(&a.parameters, &a.variables).map_err(|e| EquivError::DomainMismatch(e.to_string()))?;
    let vb = variable_table(&b.parameters, &b.variables).map_err(|e| EquivError::DomainMismatch(e.to_string()))?;
    if va != vb {
        return Err(EquivError::DomainMismatch("declared variables differ".into()));
    }
    let domain = Domain::new(&va);

    let objective = match (objective_form(&a.objective.expression, &a.parameters, &va), objective_form(&b.objective.expression, &b.parameters, &vb)) {
        _ if a.objective.sense != b.objective.sense => EquivVerdict::Distinct { witness: domain.named(&domain.base_point()) },
        (Ok(fa), Ok(fb)) => check_objective_equivalence(&fa, &fb, &domain)?,
        (Err(e), _) | (_, Err(e)) => EquivVerdict::unknown(e.to_string()),
    };

    let pair = |sa: &ConstraintSet, sb: &ConstraintSet| match (system_of(sa, &a.parameters, &va), system_of(sb, &b.parameters, &vb)) {
        (Ok(x), Ok(y)) => Ok((x, y)),
        (Err(e), _) | (_, Err(e)) => Err(e),
    };
    let (equalities, context) = match pair(&a.equalities, &b.equalities) {
        Ok((x, y)) => {
            let v = check_system_equivalence(&x, &y, ConstraintKind::Equality, &domain)?;
            let ctx = v.is_equivalent().then_some(x);
            (v, ctx)
        }
        Err(e) => (EquivVerdict::unknown(e), None),
    };
    let inequalities = match pair(&a.inequalities, &b.inequalities) {
        Ok((x, y)) => {
            let d = match &context {
                Some(ctx) => domain.clone().with_context(ctx),
                None => domain.clone(),
            };
            check_system_equivalence(&x, &y, ConstraintKind::Inequality, &d)?
        }
        Err(e) => EquivVerdict::unknown(e),
    };
    Ok(FormulationVerdict { objective, equalities, inequalities })
}

// ---------------------------------------------------------------------------
// Pruning

#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub fn find(&mut self, i: usize) -> usize {
        let mut root = i;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut k = i;
        while self.parent[k] != root {
            let next = self.parent[k];
            self.parent[k] = root;
            k = next;
        }
        root
    }

    /// Merges the classes of `a` and `b`; the smaller root index survives so
    /// every class is represented by its earliest member.
    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        let (keep, drop) = if ra <= rb { (ra, rb) } else { (rb, ra) };
        self.parent[drop] = keep;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PairVerdict {
    pub i: usize,
    pub j: usize,
    pub verdict: EquivVerdict,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PruneOutcome {
    /// Representative (earliest member) of each candidate's class.
    pub class_of: Vec<usize>,
    /// Representatives in index order.
    pub retained: Vec<usize>,
    /// Why a candidate could not be compared at all; such candidates are
    /// singleton classes.
    pub quarantined: Vec<Option<String>>,
    pub verdicts: Vec<PairVerdict>,
}

enum Prepared {
    Objective(Sense, LinearForm),
    System(CanonicalSystem),
}

fn prepare(c: &Component, stage: u8, params: &ParameterTable, vars: &VarTable) -> Result<Prepared, String> {
    match (stage, c) {
        (2, Component::Objective(o)) => objective_form(&o.expression, params, vars).map(|f| Prepared::Objective(o.sense, f)).map_err(|e| e.to_string()),
        (3, Component::Equalities(s)) | (4, Component::Inequalities(s)) => system_of(s, params, vars).map(Prepared::System),
        _ => Err(format!("component does not belong to stage {stage}")),
    }
}

/// Groups stage 2–4 candidates into equivalence classes and keeps the
/// earliest member of each. `context` is the partial formulation the
/// candidates extend.
pub fn prune_candidates(cands: &[Component], stage: u8, context: &PartialFormulation) -> PruneOutcome {
    let n = cands.len();
    let vars = variable_table(&context.parameters, &context.variables);
    let prepared: Vec<Result<Prepared, String>> = match &vars {
        Ok(vars) => cands.iter().map(|c| prepare(c, stage, &context.parameters, vars)).collect(),
        Err(e) => (0..n).map(|_| Err(e.to_string())).collect(),
    };
    let mut domain = vars.as_ref().map(Domain::new).ok();
    if stage == 4 {
        if let (Some(d), Some(eq), Ok(vars)) = (domain.take(), &context.equalities, &vars) {
            domain = Some(match system_of(eq, &context.parameters, vars) {
                Ok(ctx) => d.with_context(&ctx),
                Err(_) => d,
            });
        }
    }

    let mut uf = UnionFind::new(n);
    let mut verdicts = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let (Ok(a), Ok(b), Some(domain)) = (&prepared[i], &prepared[j], &domain) else { continue };
            let verdict = match (a, b) {
                (Prepared::Objective(sa, _), Prepared::Objective(sb, _)) if sa != sb => {
                    Ok(EquivVerdict::Distinct { witness: domain.named(&domain.base_point()) })
                }
                (Prepared::Objective(_, fa), Prepared::Objective(_, fb)) => check_objective_equivalence(fa, fb, domain),
                (Prepared::System(sa), Prepared::System(sb)) => {
                    let kind = if stage == 3 { ConstraintKind::Equality } else { ConstraintKind::Inequality };
                    check_system_equivalence(sa, sb, kind, domain)
                }
                _ => Ok(EquivVerdict::unknown("mismatched payloads")),
            }
            .unwrap_or_else(|e| EquivVerdict::unknown(e.to_string()));
            if verdict.is_equivalent() {
                uf.union(i, j);
            }
            verdicts.push(PairVerdict { i, j, verdict });
        }
    }
    let class_of: Vec<usize> = (0..n).map(|i| uf.find(i)).collect();
    let retained = (0..n).filter(|&i| class_of[i] == i).collect();
    let quarantined = prepared.into_iter().map(|p| p.err()).collect();
    PruneOutcome { class_of, retained, quarantined, verdicts }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse_relation, relation_to_linear, ground};
    use crate::model::{ConstraintSet, DecisionVariableDecl, ObjectiveSpec, VarKind};

    fn xy(kind: VarKind) -> (ParameterTable, VarTable) {
        (ParameterTable::new(), VarTable::scalars(&[("x", kind, 0.0, f64::INFINITY), ("y", kind, 0.0, f64::INFINITY)]))
    }

    fn system(texts: &[&str], params: &ParameterTable, vars: &VarTable) -> CanonicalSystem {
        let mut forms = Vec::new();
        for t in texts {
            for g in ground(&parse_relation(t).unwrap(), params).unwrap() {
                forms.push((relation_to_linear(&g, params, vars).unwrap(), g.op));
            }
        }
        CanonicalSystem::new(forms.iter().map(|(f, op)| (f, *op)))
    }

    fn objective(text: &str, params: &ParameterTable, vars: &VarTable) -> LinearForm {
        objective_form(text, params, vars).unwrap()
    }

    #[test]
    fn objective_examples() {
        let (p, v) = xy(VarKind::Continuous);
        let d = Domain::new(&v);
        let eq = |a, b| check_objective_equivalence(&objective(a, &p, &v), &objective(b, &p, &v), &d).unwrap();
        assert_eq!(eq("2*x + 3*y", "3*y + 2*x"), EquivVerdict::Equivalent);
        assert_eq!(eq("4*x + 6*y", "2*(2*x + 3*y)"), EquivVerdict::Equivalent);
        match eq("2*x", "2*x + 1") {
            EquivVerdict::Distinct { witness } => assert_eq!(witness["x"], 0.0),
            other => panic!("{other:?}"),
        }
        // Same value at the origin; the witness must move off it.
        match eq("2*x", "3*x") {
            EquivVerdict::Distinct { witness } => assert_eq!(witness["x"], 1.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn canonical_form_absorbs_scaling_and_order() {
        let (p, v) = xy(VarKind::Continuous);
        let a = system(&["x + y <= 1", "x - y == 2"], &p, &v);
        let b = system(&["-2*y + 2*x == 4", "3 >= 3*y + 3*x"], &p, &v);
        assert!(a.identical(&b));
        assert_eq!(a.canonical(), a);
        // A negative leading coefficient stays negative on inequalities.
        let c = system(&["-2*x + y <= 4"], &p, &v);
        assert_eq!(c.relations[0].coefficients[0].1, -1.0);
        assert_eq!(c.relations[0].rhs, 2.0);
    }

    #[test]
    fn system_examples() {
        let (p, v) = xy(VarKind::Continuous);
        let d = Domain::new(&v);
        let check = |a: &[&str], b: &[&str], kind| check_system_equivalence(&system(a, &p, &v), &system(b, &p, &v), kind, &d).unwrap();
        assert_eq!(check(&["x + y <= 1"], &["2*x + 2*y <= 2"], ConstraintKind::Inequality), EquivVerdict::Equivalent);
        assert_eq!(check(&["x + y <= 1", "x <= 1"], &["x + y <= 1"], ConstraintKind::Inequality), EquivVerdict::Equivalent);
        match check(&["x <= 1"], &["x <= 2"], ConstraintKind::Inequality) {
            EquivVerdict::Distinct { witness } => {
                let x = witness["x"];
                assert!(x > 1.0 && x <= 2.0);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(check(&["x == 1", "y == 2"], &["x + y == 3", "x - y == -1"], ConstraintKind::Equality), EquivVerdict::Equivalent);
        // Every point of one side lies past the other's bound by more than
        // the activity cap.
        match check(&["y == 4"], &["y == 2"], ConstraintKind::Equality) {
            EquivVerdict::Distinct { witness } => assert!((witness["y"] - 4.0).abs() < 1e-9 || (witness["y"] - 2.0).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
        assert!(matches!(check(&["x >= 5"], &["x <= 1"], ConstraintKind::Inequality), EquivVerdict::Distinct { .. }));
    }

    #[test]
    fn infeasible_systems_are_equivalent_to_each_other() {
        let (p, v) = xy(VarKind::Continuous);
        let d = Domain::new(&v);
        let a = system(&["x <= -1"], &p, &v);
        let b = system(&["x + y <= -3"], &p, &v);
        assert_eq!(check_system_equivalence(&a, &b, ConstraintKind::Inequality, &d).unwrap(), EquivVerdict::Equivalent);
    }

    #[test]
    fn lattice_tier() {
        let (p, v) = xy(VarKind::Integer);
        let d = Domain::new(&v);
        // Same integer points, different relaxations: 2x <= 1 vs x <= 0.
        let a = system(&["2*x <= 1"], &p, &v);
        let b = system(&["x <= 0"], &p, &v);
        let r = check_system_equivalence(&a, &b, ConstraintKind::Inequality, &d).unwrap();
        assert!(matches!(r, EquivVerdict::Unknown { .. }), "{r:?}");
        // Genuinely different on the lattice.
        let c = system(&["2*x <= 3"], &p, &v);
        match check_system_equivalence(&a, &c, ConstraintKind::Inequality, &d).unwrap() {
            EquivVerdict::Distinct { witness } => assert_eq!(witness["x"], 1.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn undeclared_instances_are_a_domain_mismatch() {
        let (p, v) = xy(VarKind::Continuous);
        let d = Domain::new(&VarTable::scalars(&[("x", VarKind::Continuous, 0.0, f64::INFINITY)]));
        let a = system(&["x + y <= 1"], &p, &v);
        assert!(check_system_equivalence(&a, &a, ConstraintKind::Inequality, &d).is_err());
    }

    #[test]
    fn union_find_keeps_earliest() {
        let mut uf = UnionFind::new(5);
        uf.union(3, 1);
        uf.union(4, 3);
        uf.union(2, 0);
        assert_eq!((0..5).map(|i| uf.find(i)).collect::<Vec<_>>(), vec![0, 1, 0, 1, 1]);
    }

    fn context() -> PartialFormulation {
        let mut p = PartialFormulation::root();
        p.push(Component::Variables {
            parameters: ParameterTable::new(),
            variables: vec![DecisionVariableDecl::new("x", VarKind::Continuous), DecisionVariableDecl::new("y", VarKind::Continuous)],
        })
        .unwrap();
        p
    }

    #[test]
    fn prunes_objectives() {
        let obj = |s: &str| Component::Objective(ObjectiveSpec::new(Sense::Max, s));
        let cands = vec![obj("2*x + 3*y"), obj("3*y + 2*x"), obj("x*y"), obj("x"), obj("4*x/2 + 3*y"), obj("x*y")];
        let out = prune_candidates(&cands, 2, &context());
        assert_eq!(out.retained, vec![0, 2, 3, 5]);
        assert_eq!(out.class_of, vec![0, 0, 2, 3, 0, 5]);
        assert!(out.quarantined[2].is_some());
        let same = vec![obj("x + y"); 4];
        assert_eq!(prune_candidates(&same, 2, &context()).retained, vec![0]);
    }

    #[test]
    fn inequality_stage_sees_context_equalities() {
        let mut ctx = context();
        ctx.push(Component::Objective(ObjectiveSpec::new(Sense::Min, "x"))).unwrap();
        ctx.push(Component::Equalities(ConstraintSet::from_pairs(ConstraintKind::Equality, [("tie", "x == y")]))).unwrap();
        let ineq = |s: &str| Component::Inequalities(ConstraintSet::from_pairs(ConstraintKind::Inequality, [("c", s)]));
        let out = prune_candidates(&[ineq("x <= 3"), ineq("y <= 3")], 4, &ctx);
        assert_eq!(out.retained, vec![0]);
    }
}
