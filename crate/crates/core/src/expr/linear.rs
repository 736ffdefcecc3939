use std::collections::BTreeMap;

use thiserror::Error;

use super::ast::Expr;
use super::ground::{enumerate, Env, GroundError, GroundRelation, VarInstance, VarTable};
use crate::model::ParameterTable;

/// Coefficients with magnitude below this are dropped on normalization.
pub const COEFF_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LinearizeError {
    #[error("non-linear term `{expr}`: {reason}")]
    NonLinear { expr: String, reason: &'static str },
    #[error("variable instance `{0}` is not declared")]
    UnknownInstance(String),
    #[error("variable `{0}` is indexed; use `{0}[...]`")]
    MissingIndex(String),
    #[error(transparent)]
    Ground(#[from] GroundError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("no value bound for `{0}`")]
    MissingBinding(String),
    #[error("division by zero in `{0}`")]
    DivisionByZero(String),
    #[error(transparent)]
    Ground(#[from] GroundError),
}

/// `Σ coefficient·instance + constant`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinearForm {
    pub coefficients: BTreeMap<VarInstance, f64>,
    pub constant: f64,
}

impl LinearForm {
    pub fn constant(c: f64) -> Self {
        LinearForm { coefficients: BTreeMap::new(), constant: c }
    }

    pub fn var(v: VarInstance) -> Self {
        LinearForm { coefficients: BTreeMap::from([(v, 1.0)]), constant: 0.0 }
    }

    pub fn is_constant(&self) -> bool {
        self.coefficients.is_empty()
    }

    pub fn scale(mut self, k: f64) -> Self {
        for c in self.coefficients.values_mut() {
            *c *= k;
        }
        self.constant *= k;
        self.normalized()
    }

    pub fn add(mut self, other: &LinearForm, sign: f64) -> Self {
        for (v, c) in &other.coefficients {
            *self.coefficients.entry(v.clone()).or_insert(0.0) += sign * c;
        }
        self.constant += sign * other.constant;
        self.normalized()
    }

    pub fn normalized(mut self) -> Self {
        self.coefficients.retain(|_, c| c.abs() >= COEFF_EPS);
        self
    }

    pub fn coefficient(&self, v: &VarInstance) -> f64 {
        self.coefficients.get(v).copied().unwrap_or(0.0)
    }

    pub fn evaluate(&self, assignment: &BTreeMap<VarInstance, f64>) -> Result<f64, EvalError> {
        let mut total = self.constant;
        for (v, c) in &self.coefficients {
            let x = assignment.get(v).ok_or_else(|| EvalError::MissingBinding(v.to_string()))?;
            total += c * x;
        }
        Ok(total)
    }
}

/// Extracts the affine form of `e`, substituting parameters and expanding
/// `sum` nodes.
pub fn to_linear(e: &Expr, params: &ParameterTable, vars: &VarTable) -> Result<LinearForm, LinearizeError> {
    linearize(e, &Env::with_vars(params, vars)).map(LinearForm::normalized)
}

/// `lhs - rhs` of a grounded relation.
pub fn relation_to_linear(rel: &GroundRelation, params: &ParameterTable, vars: &VarTable) -> Result<LinearForm, LinearizeError> {
    let env = Env::with_vars(params, vars);
    Ok(linearize(&rel.lhs, &env)?.add(&linearize(&rel.rhs, &env)?, -1.0))
}

fn lookup_var(env: &Env<'_>, name: &str, index: Vec<i64>, text: &Expr) -> Result<Option<LinearForm>, LinearizeError> {
    let Some(vars) = env.vars else { return Ok(None) };
    let Some(info) = vars.get(name) else { return Ok(None) };
    if info.indexed && index.is_empty() {
        return Err(LinearizeError::MissingIndex(name.to_string()));
    }
    if !info.contains(&index) {
        return Err(LinearizeError::UnknownInstance(text.to_string()));
    }
    Ok(Some(LinearForm::var(VarInstance::indexed(name, index))))
}

fn linearize(e: &Expr, env: &Env<'_>) -> Result<LinearForm, LinearizeError> {
    Ok(match e {
        Expr::Number(v) => LinearForm::constant(*v),
        Expr::Ident(name) => {
            if let Some(v) = env.binding(name) {
                LinearForm::constant(v)
            } else if let Some(form) = lookup_var(env, name, Vec::new(), e)? {
                form
            } else {
                LinearForm::constant(env.constant(e)?)
            }
        }
        Expr::Index(name, idx) => {
            let index = env.indices(idx)?;
            match lookup_var(env, name, index, e)? {
                Some(form) => form,
                None => LinearForm::constant(env.constant(e)?),
            }
        }
        Expr::Neg(a) => linearize(a, env)?.scale(-1.0),
        Expr::Paren(a) => linearize(a, env)?,
        Expr::Add(a, b) => linearize(a, env)?.add(&linearize(b, env)?, 1.0),
        Expr::Sub(a, b) => linearize(a, env)?.add(&linearize(b, env)?, -1.0),
        Expr::Mul(a, b) => {
            let (x, y) = (linearize(a, env)?, linearize(b, env)?);
            match (x.is_constant(), y.is_constant()) {
                (true, _) => y.scale(x.constant),
                (_, true) => x.scale(y.constant),
                _ => return Err(LinearizeError::NonLinear { expr: e.to_string(), reason: "product of decision variables" }),
            }
        }
        Expr::Div(a, b) => {
            let d = linearize(b, env)?;
            if !d.is_constant() {
                return Err(LinearizeError::NonLinear { expr: e.to_string(), reason: "decision variable in denominator" });
            }
            if d.constant == 0.0 {
                return Err(GroundError::DivisionByZero(e.to_string()).into());
            }
            linearize(a, env)?.scale(1.0 / d.constant)
        }
        Expr::Sum(body, comps) => {
            let mut total = LinearForm::default();
            let mut inner = env.clone();
            enumerate(comps, &mut inner, &mut |env| {
                total = std::mem::take(&mut total).add(&linearize(body, env)?, 1.0);
                Ok::<(), LinearizeError>(())
            })?;
            total
        }
    })
}

/// Evaluates `e` at `assignment`. Sums whose ranges resolve against the
/// parameters are expanded on the fly.
pub fn evaluate(e: &Expr, assignment: &BTreeMap<VarInstance, f64>, params: &ParameterTable) -> Result<f64, EvalError> {
    eval(e, assignment, &Env::new(params))
}

fn eval(e: &Expr, a: &BTreeMap<VarInstance, f64>, env: &Env<'_>) -> Result<f64, EvalError> {
    let lookup = |name: &str, index: Vec<i64>| -> Result<f64, EvalError> {
        let inst = VarInstance::indexed(name, index);
        if let Some(v) = a.get(&inst) {
            return Ok(*v);
        }
        if env.params.contains(name) {
            return env.params.lookup(name, &inst.index).map_err(|_| {
                EvalError::Ground(GroundError::IndexOutOfExtent { name: name.to_string(), index: inst.index.clone() })
            });
        }
        Err(EvalError::MissingBinding(inst.to_string()))
    };
    Ok(match e {
        Expr::Number(v) => *v,
        Expr::Ident(name) => match env.binding(name) {
            Some(v) => v,
            None => lookup(name, Vec::new())?,
        },
        Expr::Index(name, idx) => {
            let index = env.indices(idx).map_err(EvalError::Ground)?;
            lookup(name, index)?
        }
        Expr::Neg(x) => -eval(x, a, env)?,
        Expr::Paren(x) => eval(x, a, env)?,
        Expr::Add(x, y) => eval(x, a, env)? + eval(y, a, env)?,
        Expr::Sub(x, y) => eval(x, a, env)? - eval(y, a, env)?,
        Expr::Mul(x, y) => eval(x, a, env)? * eval(y, a, env)?,
        Expr::Div(x, y) => {
            let d = eval(y, a, env)?;
            if d == 0.0 {
                return Err(EvalError::DivisionByZero(e.to_string()));
            }
            eval(x, a, env)? / d
        }
        Expr::Sum(body, comps) => {
            let mut total = 0.0;
            let mut inner = env.clone();
            enumerate(comps, &mut inner, &mut |env| {
                total += eval(body, a, env)?;
                Ok::<(), EvalError>(())
            })?;
            total
        }
    })
}
