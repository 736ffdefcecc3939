use std::collections::HashSet;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ast::{Comprehension, Expr, Iterable, QuantifiedRelation, RelOp, Relation};
use super::parse::{parse_iteration_space, ParseError};
use crate::model::{DecisionVariableDecl, ParamLookupError, ParameterTable, VarKind};

const INTEGRAL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GroundError {
    #[error("unresolved iterable `{0}`")]
    UnresolvedIterable(String),
    #[error("iterable `{0}` is not a list-valued parameter")]
    NotIterable(String),
    #[error("range bound `{expr}` evaluates to {value}, not a non-negative integer")]
    BadRangeBound { expr: String, value: f64 },
    #[error("index `{expr}` evaluates to {value}, not an integer")]
    NonIntegerIndex { expr: String, value: f64 },
    #[error("index {index:?} is outside the extent of parameter `{name}`")]
    IndexOutOfExtent { name: String, index: Vec<i64> },
    #[error("parameter `{name}` expects {expected} indices, got {got}")]
    IndexArity { name: String, expected: usize, got: usize },
    #[error("unresolved identifier `{0}`")]
    Unresolved(String),
    #[error("`{0}` refers to a decision variable where a constant is required")]
    VariableInConstant(String),
    #[error("division by zero in `{0}`")]
    DivisionByZero(String),
    #[error("iteration space of `{name}`: {source}")]
    IterationSpace { name: String, source: ParseError },
}

/// A decision-variable instance such as `x` or `x[0, 2]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarInstance {
    pub name: String,
    pub index: Vec<i64>,
}

impl VarInstance {
    pub fn scalar(name: impl Into<String>) -> Self {
        VarInstance { name: name.into(), index: Vec::new() }
    }

    pub fn indexed(name: impl Into<String>, index: Vec<i64>) -> Self {
        VarInstance { name: name.into(), index }
    }
}

impl fmt::Display for VarInstance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.index.is_empty() {
            write!(f, "{}", self.name)
        } else {
            let idx: Vec<String> = self.index.iter().map(i64::to_string).collect();
            write!(f, "{}[{}]", self.name, idx.join(","))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarInfo {
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
    /// Instance indices in row-major order of the iteration space; a single
    /// empty index for scalar variables.
    pub indices: Vec<Vec<i64>>,
    pub indexed: bool,
    members: HashSet<Vec<i64>>,
}

impl VarInfo {
    pub fn contains(&self, index: &[i64]) -> bool {
        self.members.contains(index)
    }
}

/// Declared decision variables with their instantiated index sets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VarTable {
    vars: IndexMap<String, VarInfo>,
}

impl VarTable {
    pub fn build(decls: &[DecisionVariableDecl], params: &ParameterTable) -> Result<VarTable, GroundError> {
        let mut vars = IndexMap::new();
        for d in decls {
            let (lower, upper) = d.effective_bounds();
            let (indices, indexed) = match &d.iteration_space {
                Some(space) => {
                    let comps = parse_iteration_space(space)
                        .map_err(|source| GroundError::IterationSpace { name: d.name.clone(), source })?;
                    let mut env = Env::new(params);
                    let mut rows = Vec::new();
                    enumerate(&comps, &mut env, &mut |env| {
                        let idx = comps
                            .iter()
                            .map(|c| {
                                let v = env.binding(&c.var).expect("bound by enumerate");
                                as_integer(v, &c.var)
                            })
                            .collect::<Result<Vec<_>, _>>()?;
                        rows.push(idx);
                        Ok(())
                    })?;
                    (rows, true)
                }
                None => (vec![Vec::new()], false),
            };
            let members = indices.iter().cloned().collect();
            vars.insert(d.name.clone(), VarInfo { kind: d.kind, lower, upper, indices, indexed, members });
        }
        Ok(VarTable { vars })
    }

    /// A table of scalar continuous variables with the given bounds, handy for
    /// equivalence checks on hand-built systems.
    pub fn scalars(specs: &[(&str, VarKind, f64, f64)]) -> VarTable {
        let mut vars = IndexMap::new();
        for (name, kind, lower, upper) in specs {
            let indices = vec![Vec::new()];
            let members = indices.iter().cloned().collect();
            vars.insert(name.to_string(), VarInfo { kind: *kind, lower: *lower, upper: *upper, indices, indexed: false, members });
        }
        VarTable { vars }
    }

    pub fn get(&self, name: &str) -> Option<&VarInfo> {
        self.vars.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.vars.contains_key(name)
    }

    /// All instances in declaration-then-row-major order.
    pub fn instances(&self) -> impl Iterator<Item = (VarInstance, &VarInfo)> + '_ {
        self.vars
            .iter()
            .flat_map(|(name, info)| info.indices.iter().map(move |idx| (VarInstance::indexed(name.clone(), idx.clone()), info)))
    }

    pub fn instance_count(&self) -> usize {
        self.vars.values().map(|v| v.indices.len()).sum()
    }

    pub fn info_of(&self, inst: &VarInstance) -> Option<&VarInfo> {
        self.vars.get(&inst.name).filter(|info| info.contains(&inst.index))
    }

    pub fn has_integral(&self) -> bool {
        self.vars.values().any(|v| v.kind.is_integral())
    }
}

/// Evaluation environment: parameters plus comprehension bindings.
#[derive(Clone)]
pub struct Env<'a> {
    pub params: &'a ParameterTable,
    pub vars: Option<&'a VarTable>,
    bindings: Vec<(String, f64)>,
}

impl<'a> Env<'a> {
    pub fn new(params: &'a ParameterTable) -> Self {
        Env { params, vars: None, bindings: Vec::new() }
    }

    pub fn with_vars(params: &'a ParameterTable, vars: &'a VarTable) -> Self {
        Env { params, vars: Some(vars), bindings: Vec::new() }
    }

    pub fn binding(&self, name: &str) -> Option<f64> {
        self.bindings.iter().rev().find(|(n, _)| n == name).map(|(_, v)| *v)
    }

    fn push(&mut self, name: &str, v: f64) {
        self.bindings.push((name.to_string(), v));
    }

    fn pop(&mut self) {
        self.bindings.pop();
    }

    fn is_var(&self, name: &str) -> bool {
        self.vars.is_some_and(|v| v.contains(name))
    }

    /// Evaluates an expression that must not reference decision variables.
    pub fn constant(&self, e: &Expr) -> Result<f64, GroundError> {
        Ok(match e {
            Expr::Number(v) => *v,
            Expr::Ident(name) => {
                if let Some(v) = self.binding(name) {
                    v
                } else if self.is_var(name) {
                    return Err(GroundError::VariableInConstant(name.clone()));
                } else {
                    self.param(name, &[])?
                }
            }
            Expr::Index(name, idx) => {
                if self.is_var(name) {
                    return Err(GroundError::VariableInConstant(e.to_string()));
                }
                let index = self.indices(idx)?;
                self.param(name, &index)?
            }
            Expr::Neg(a) => -self.constant(a)?,
            Expr::Paren(a) => self.constant(a)?,
            Expr::Add(a, b) => self.constant(a)? + self.constant(b)?,
            Expr::Sub(a, b) => self.constant(a)? - self.constant(b)?,
            Expr::Mul(a, b) => self.constant(a)? * self.constant(b)?,
            Expr::Div(a, b) => {
                let d = self.constant(b)?;
                if d == 0.0 {
                    return Err(GroundError::DivisionByZero(e.to_string()));
                }
                self.constant(a)? / d
            }
            Expr::Sum(body, comps) => {
                let mut total = 0.0;
                let mut env = self.clone();
                enumerate(comps, &mut env, &mut |env| {
                    total += env.constant(body)?;
                    Ok(())
                })?;
                total
            }
        })
    }

    fn param(&self, name: &str, index: &[i64]) -> Result<f64, GroundError> {
        self.params.lookup(name, index).map_err(|e| match e {
            ParamLookupError::Unknown => GroundError::Unresolved(name.to_string()),
            ParamLookupError::WrongArity { expected, got } => GroundError::IndexArity { name: name.to_string(), expected, got },
            ParamLookupError::OutOfRange => GroundError::IndexOutOfExtent { name: name.to_string(), index: index.to_vec() },
        })
    }

    pub fn indices(&self, idx: &[Expr]) -> Result<Vec<i64>, GroundError> {
        idx.iter().map(|e| as_integer(self.constant(e)?, &e.to_string())).collect()
    }

    fn iterable_values(&self, it: &Iterable) -> Result<Vec<f64>, GroundError> {
        match it {
            Iterable::Range { start, end } => {
                let bound = |e: &Expr| -> Result<i64, GroundError> {
                    let v = self.constant(e)?;
                    if v < 0.0 || (v - v.round()).abs() > INTEGRAL_TOL {
                        return Err(GroundError::BadRangeBound { expr: e.to_string(), value: v });
                    }
                    Ok(v.round() as i64)
                };
                let lo = match start {
                    Some(s) => bound(s)?,
                    None => 0,
                };
                let hi = bound(end)?;
                Ok((lo..hi).map(|k| k as f64).collect())
            }
            Iterable::Param(name) => {
                if let Some(v) = self.binding(name) {
                    return Err(GroundError::NotIterable(format!("{name}={v}")));
                }
                let value = self.params.get(name).ok_or_else(|| GroundError::UnresolvedIterable(name.clone()))?;
                value.iter_values().ok_or_else(|| GroundError::NotIterable(name.clone()))
            }
        }
    }
}

fn as_integer(v: f64, what: &str) -> Result<i64, GroundError> {
    if (v - v.round()).abs() > INTEGRAL_TOL || !v.is_finite() {
        return Err(GroundError::NonIntegerIndex { expr: what.to_string(), value: v });
    }
    Ok(v.round() as i64)
}

/// Runs `f` once per point of the cartesian product of `comps`, first clause
/// outermost, with each clause variable bound in `env`.
pub fn enumerate<'a, E: From<GroundError>>(
    comps: &[Comprehension],
    env: &mut Env<'a>,
    f: &mut dyn FnMut(&Env<'a>) -> Result<(), E>,
) -> Result<(), E> {
    match comps.split_first() {
        None => f(env),
        Some((first, rest)) => {
            let values = env.iterable_values(&first.iterable).map_err(E::from)?;
            for v in values {
                env.push(&first.var, v);
                let r = enumerate(rest, env, f);
                env.pop();
                r?;
            }
            Ok(())
        }
    }
}

/// A relation with all comprehensions unrolled and all indices evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundRelation {
    pub lhs: Expr,
    pub op: RelOp,
    pub rhs: Expr,
}

impl fmt::Display for GroundRelation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.op.symbol(), self.rhs)
    }
}

/// Unrolls trailing comprehension clauses (cartesian product in declaration
/// order) and inner `sum` nodes, substituting bound indices.
pub fn ground(rel: &QuantifiedRelation, params: &ParameterTable) -> Result<Vec<GroundRelation>, GroundError> {
    let mut out = Vec::new();
    let mut env = Env::new(params);
    enumerate(&rel.comprehensions, &mut env, &mut |env| {
        out.push(GroundRelation { lhs: ground_expr(&rel.relation.lhs, env)?, op: rel.relation.op, rhs: ground_expr(&rel.relation.rhs, env)? });
        Ok(())
    })?;
    Ok(out)
}

pub fn ground_relation(rel: &Relation, params: &ParameterTable) -> Result<GroundRelation, GroundError> {
    let env = Env::new(params);
    Ok(GroundRelation { lhs: ground_expr(&rel.lhs, &env)?, op: rel.op, rhs: ground_expr(&rel.rhs, &env)? })
}

/// Grounds a single expression (e.g. an objective) against `params`.
pub fn ground_expression(e: &Expr, params: &ParameterTable) -> Result<Expr, GroundError> {
    ground_expr(e, &Env::new(params))
}

fn ground_expr(e: &Expr, env: &Env<'_>) -> Result<Expr, GroundError> {
    let b = |x: &Expr| ground_expr(x, env).map(Box::new);
    Ok(match e {
        Expr::Number(v) => Expr::Number(*v),
        Expr::Ident(name) => match env.binding(name) {
            Some(v) => Expr::Number(v),
            None => Expr::Ident(name.clone()),
        },
        Expr::Index(name, idx) => {
            let index = env.indices(idx)?;
            if env.params.contains(name) && env.binding(name).is_none() {
                // Checks the extent now; the value is substituted later.
                env.param(name, &index)?;
            }
            Expr::Index(name.clone(), index.into_iter().map(|k| Expr::Number(k as f64)).collect())
        }
        Expr::Neg(a) => Expr::Neg(b(a)?),
        Expr::Paren(a) => Expr::Paren(b(a)?),
        Expr::Add(x, y) => Expr::Add(b(x)?, b(y)?),
        Expr::Sub(x, y) => Expr::Sub(b(x)?, b(y)?),
        Expr::Mul(x, y) => Expr::Mul(b(x)?, b(y)?),
        Expr::Div(x, y) => Expr::Div(b(x)?, b(y)?),
        Expr::Sum(body, comps) => {
            let mut terms: Vec<Expr> = Vec::new();
            let mut inner = env.clone();
            enumerate(comps, &mut inner, &mut |env| {
                terms.push(ground_expr(body, env)?);
                Ok(())
            })?;
            let mut it = terms.into_iter();
            match it.next() {
                None => Expr::Number(0.0),
                Some(first) => Expr::Paren(Box::new(it.fold(first, |acc, t| Expr::Add(Box::new(acc), Box::new(t))))),
            }
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse::parse_relation;
    use crate::model::ParamValue;

    fn caps() -> ParameterTable {
        ParameterTable::new().with("capacity", ParamValue::List(vec![3.0, 5.0])).with("n", ParamValue::Scalar(2.0))
    }

    #[test]
    fn unrolls_single_clause() {
        let rel = parse_relation("x[i] <= capacity[i] for i in range(2)").unwrap();
        let g = ground(&rel, &caps()).unwrap();
        assert_eq!(g.len(), 2);
        assert_eq!(g[0].to_string(), "x[0] <= capacity[0]");
        assert_eq!(g[1].to_string(), "x[1] <= capacity[1]");
    }

    #[test]
    fn cartesian_row_major() {
        let rel = parse_relation("x[i, j] >= 0 for i in range(2) for j in range(2)").unwrap();
        let g: Vec<String> = ground(&rel, &caps()).unwrap().iter().map(|r| r.lhs.to_string()).collect();
        assert_eq!(g, ["x[0, 0]", "x[0, 1]", "x[1, 0]", "x[1, 1]"]);
    }

    #[test]
    fn empty_range_yields_nothing() {
        let rel = parse_relation("x[i] >= 1 for i in range(0)").unwrap();
        assert!(ground(&rel, &caps()).unwrap().is_empty());
    }

    #[test]
    fn inner_sums_expand() {
        let rel = parse_relation("sum(x[i] for i in range(n)) <= 4").unwrap();
        let g = ground(&rel, &caps()).unwrap();
        assert_eq!(g[0].to_string(), "(x[0] + x[1]) <= 4");
    }

    #[test]
    fn errors() {
        let p = caps();
        let bad = |s: &str| ground(&parse_relation(s).unwrap(), &p).unwrap_err();
        assert!(matches!(bad("x[i] <= 1 for i in items"), GroundError::UnresolvedIterable(_)));
        assert!(matches!(bad("x[i] <= 1 for i in range(1.5)"), GroundError::BadRangeBound { .. }));
        assert!(matches!(bad("x[i] <= capacity[i] for i in range(3)"), GroundError::IndexOutOfExtent { .. }));
        assert!(matches!(bad("x[i] <= 1 for i in n"), GroundError::NotIterable(_)));
    }

    #[test]
    fn list_parameter_iterable() {
        let p = ParameterTable::new().with("items", ParamValue::List(vec![2.0, 0.0]));
        let g = ground(&parse_relation("y[k] >= k for k in items").unwrap(), &p).unwrap();
        assert_eq!(g[0].to_string(), "y[2] >= 2");
        assert_eq!(g[1].to_string(), "y[0] >= 0");
    }

    #[test]
    fn var_table_instances() {
        let decls = vec![
            DecisionVariableDecl::new("x", VarKind::Continuous).indexed("for i in range(n) for j in range(1, 3)"),
            DecisionVariableDecl::new("y", VarKind::Binary),
        ];
        let t = VarTable::build(&decls, &caps()).unwrap();
        let names: Vec<String> = t.instances().map(|(v, _)| v.to_string()).collect();
        assert_eq!(names, ["x[0,1]", "x[0,2]", "x[1,1]", "x[1,2]", "y"]);
        assert_eq!(t.get("y").unwrap().upper, 1.0);
    }
}
