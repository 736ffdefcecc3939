use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::Row;
use crate::expr::{
    ground, ground_expression, parse_expression, parse_relation, relation_to_linear, to_linear, GroundError, LinearForm,
    LinearizeError, ParseError, RelOp, VarInstance, VarTable,
};
use crate::model::{validate, ConstraintSet, DecisionVariableDecl, Formulation, ParameterTable, Sense, VarKind, Violation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: VarKind,
    /// `None` stands for an infinite bound.
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

impl Column {
    pub fn lower_value(&self) -> f64 {
        self.lower.unwrap_or(f64::NEG_INFINITY)
    }

    pub fn upper_value(&self) -> f64 {
        self.upper.unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelObjective {
    pub sense: Sense,
    pub coefficients: Vec<f64>,
    pub constant: f64,
}

/// A grounded LP/MILP: columns, objective, and sparse rows. Each row keeps
/// the name of the constraint entry it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComputationalModel {
    pub columns: Vec<Column>,
    pub objective: ModelObjective,
    pub rows: Vec<Row>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoweringError {
    #[error("formulation fails validation: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Invalid(Vec<Violation>),
    #[error("{entry}: {source}")]
    Parse { entry: String, source: ParseError },
    #[error("{entry}: {source}")]
    Ground { entry: String, source: GroundError },
    #[error("{entry}: {source}")]
    Linearize { entry: String, source: LinearizeError },
}

impl LoweringError {
    pub fn entry(&self) -> Option<&str> {
        match self {
            LoweringError::Invalid(_) => None,
            LoweringError::Parse { entry, .. } | LoweringError::Ground { entry, .. } | LoweringError::Linearize { entry, .. } => Some(entry),
        }
    }

    pub fn is_nonlinear(&self) -> bool {
        matches!(self, LoweringError::Linearize { source: LinearizeError::NonLinear { .. }, .. })
    }
}

impl ComputationalModel {
    /// Assembles a model from affine pieces over `vars`. Row forms are
    /// `lhs - rhs`, so each becomes `coefficients op -constant`.
    pub fn from_linear(vars: &VarTable, sense: Sense, objective: &LinearForm, rows: &[(LinearForm, RelOp, String)]) -> ComputationalModel {
        let lookup: HashMap<VarInstance, usize> = vars.instances().enumerate().map(|(j, (inst, _))| (inst, j)).collect();
        let columns = vars
            .instances()
            .map(|(inst, info)| Column {
                name: inst.to_string(),
                kind: info.kind,
                lower: info.lower.is_finite().then_some(info.lower),
                upper: info.upper.is_finite().then_some(info.upper),
            })
            .collect();
        let index_of = |v: &VarInstance| lookup[v];
        let mut dense = vec![0.0; lookup.len()];
        for (v, c) in &objective.coefficients {
            dense[index_of(v)] = *c;
        }
        let rows = rows
            .iter()
            .map(|(form, op, source)| {
                let mut coefficients: Vec<(usize, f64)> = form.coefficients.iter().map(|(v, c)| (index_of(v), *c)).collect();
                coefficients.sort_by_key(|&(j, _)| j);
                Row { coefficients, op: *op, rhs: -form.constant, source: source.clone() }
            })
            .collect();
        ComputationalModel { columns, objective: ModelObjective { sense, coefficients: dense, constant: objective.constant }, rows }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    /// Originating constraint entry per row.
    pub fn provenance(&self) -> Vec<&str> {
        self.rows.iter().map(|r| r.source.as_str()).collect()
    }

    pub fn has_integral(&self) -> bool {
        self.columns.iter().any(|c| c.kind.is_integral())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.constant + self.objective.coefficients.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }

    pub fn activity(row: &Row, x: &[f64]) -> f64 {
        row.coefficients.iter().map(|&(j, c)| c * x[j]).sum()
    }

    /// Checks rows, bounds, and integrality of `x` within `tol`.
    pub fn is_feasible(&self, x: &[f64], tol: f64) -> bool {
        let rows_ok = self.rows.iter().all(|r| r.op.holds(Self::activity(r, x), r.rhs, tol));
        let cols_ok = self.columns.iter().zip(x).all(|(c, &v)| {
            v >= c.lower_value() - tol && v <= c.upper_value() + tol && (!c.kind.is_integral() || (v - v.round()).abs() <= tol)
        });
        rows_ok && cols_ok
    }
}

pub fn objective_form(expression: &str, params: &ParameterTable, vars: &VarTable) -> Result<LinearForm, LoweringError> {
    let entry = || "objective".to_string();
    let e = parse_expression(expression).map_err(|source| LoweringError::Parse { entry: entry(), source })?;
    let g = ground_expression(&e, params).map_err(|source| LoweringError::Ground { entry: entry(), source })?;
    to_linear(&g, params, vars).map_err(|source| LoweringError::Linearize { entry: entry(), source })
}

/// Grounds and linearizes every entry of `set`, tagging rows with
/// `<component>.<entry name>`.
pub fn constraint_rows(set: &ConstraintSet, params: &ParameterTable, vars: &VarTable, component: &str) -> Result<Vec<(LinearForm, RelOp, String)>, LoweringError> {
    let mut out = Vec::new();
    for (name, text) in &set.entries {
        let entry = format!("{component}.{name}");
        let rel = parse_relation(text).map_err(|source| LoweringError::Parse { entry: entry.clone(), source })?;
        let grounded = ground(&rel, params).map_err(|source| LoweringError::Ground { entry: entry.clone(), source })?;
        for g in grounded {
            let form = relation_to_linear(&g, params, vars).map_err(|source| LoweringError::Linearize { entry: entry.clone(), source })?;
            out.push((form, g.op, entry.clone()));
        }
    }
    Ok(out)
}

pub fn variable_table(params: &ParameterTable, decls: &[DecisionVariableDecl]) -> Result<VarTable, LoweringError> {
    VarTable::build(decls, params).map_err(|source| LoweringError::Ground { entry: "decision_variables".into(), source })
}

/// Turns a complete formulation into a computational model. Columns follow
/// declaration order, then row-major order of each iteration space; rows
/// follow equality entries, then inequality entries.
pub fn lower(f: &Formulation) -> Result<ComputationalModel, LoweringError> {
    let violations = validate(f);
    if !violations.is_empty() {
        return Err(LoweringError::Invalid(violations));
    }
    let vars = variable_table(&f.parameters, &f.variables)?;
    let objective = objective_form(&f.objective.expression, &f.parameters, &vars)?;
    let mut rows = constraint_rows(&f.equalities, &f.parameters, &vars, "equality_constraints")?;
    rows.extend(constraint_rows(&f.inequalities, &f.parameters, &vars, "inequality_constraints")?);
    Ok(ComputationalModel::from_linear(&vars, f.objective.sense, &objective, &rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ConstraintKind, ObjectiveSpec, ParamValue};

    fn blend() -> Formulation {
        Formulation {
            parameters: ParameterTable::new().with("cap", ParamValue::Scalar(4.0)),
            variables: vec![DecisionVariableDecl::new("x1", VarKind::Continuous), DecisionVariableDecl::new("x2", VarKind::Continuous)],
            objective: ObjectiveSpec::new(Sense::Max, "3*x1 + 2*x2"),
            equalities: ConstraintSet::empty(ConstraintKind::Equality),
            inequalities: ConstraintSet::from_pairs(ConstraintKind::Inequality, [("total", "x1 + x2 <= cap"), ("x1_limit", "x1 <= 2")]),
        }
    }

    #[test]
    fn lowers_blend_problem() {
        let m = lower(&blend()).unwrap();
        assert_eq!(m.columns.len(), 2);
        assert_eq!(m.rows.len(), 2);
        assert_eq!(m.objective.sense, Sense::Max);
        assert_eq!(m.objective.coefficients, vec![3.0, 2.0]);
        assert_eq!(m.rows[0].coefficients, vec![(0, 1.0), (1, 1.0)]);
        assert_eq!(m.rows[0].rhs, 4.0);
        assert_eq!(m.provenance(), vec!["inequality_constraints.total", "inequality_constraints.x1_limit"]);
    }

    #[test]
    fn instantiates_iteration_spaces() {
        let mut f = blend();
        f.variables.push(DecisionVariableDecl::new("x", VarKind::Integer).indexed("for i in range(3)"));
        let m = lower(&f).unwrap();
        let names: Vec<_> = m.columns.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, ["x1", "x2", "x[0]", "x[1]", "x[2]"]);
        assert_eq!(m.columns[2].kind, VarKind::Integer);
        assert_eq!(m.columns[2].lower, Some(0.0));
        assert_eq!(m.columns[2].upper, None);
    }

    #[test]
    fn quantified_rows_carry_their_entry() {
        let mut f = blend();
        f.parameters.insert("ub", ParamValue::List(vec![3.0, 5.0]), "");
        f.variables.push(DecisionVariableDecl::new("y", VarKind::Continuous).indexed("for i in range(2)"));
        f.inequalities.entries.insert("y_cap".into(), "y[i] <= ub[i] for i in range(2)".into());
        let m = lower(&f).unwrap();
        assert_eq!(m.rows.len(), 4);
        assert_eq!(m.rows[2].coefficients, vec![(2, 1.0)]);
        assert_eq!(m.rows[3].rhs, 5.0);
        assert_eq!(m.rows[3].source, "inequality_constraints.y_cap");
    }

    #[test]
    fn reports_offending_entry() {
        let mut f = blend();
        f.equalities = ConstraintSet::from_pairs(ConstraintKind::Equality, [("product", "x1*x2 == 1")]);
        let err = lower(&f).unwrap_err();
        assert!(err.is_nonlinear());
        assert_eq!(err.entry(), Some("equality_constraints.product"));

        let mut f = blend();
        f.objective.expression = "3*x1 + z".into();
        assert!(matches!(lower(&f), Err(LoweringError::Invalid(_))));
    }

    #[test]
    fn lowering_is_deterministic() {
        assert_eq!(lower(&blend()).unwrap(), lower(&blend()).unwrap());
    }
}
