//! Formulation schema shared by every stage of the pipeline.
//!
//! A formulation has five parts, in the order they are produced by the
//! search: parameters, decision variables, objective, equality constraints
//! and inequality constraints. Parameters and decision variables together
//! form the first search level.

use std::collections::BTreeMap;
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::expr::{self, parse_expression, parse_iteration_space, parse_relation, RelOp};

/// A natural-language problem plus optional benchmark labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemDescription {
    pub id: String,
    #[serde(rename = "description")]
    pub text: String,
    #[serde(default)]
    pub ground_truth_objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<Difficulty>,
    #[serde(default, alias = "type", skip_serializing_if = "Option::is_none")]
    pub problem_type: Option<ProblemType>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Difficulty {
    Easy,
    Medium,
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ProblemType {
    LP,
    IP,
    MIP,
}

impl fmt::Display for Difficulty {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl fmt::Display for ProblemType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Numeric parameter data. Tables are keyed by index tuples of arity 1 or 2.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamValue {
    Scalar(f64),
    List(Vec<f64>),
    Table(BTreeMap<Vec<i64>, f64>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub value: ParamValue,
    pub comment: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamLookupError {
    Unknown,
    WrongArity { expected: usize, got: usize },
    OutOfRange,
}

impl ParamValue {
    /// Converts a rectangular list of rows into an arity-2 table.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> ParamValue {
        let mut table = BTreeMap::new();
        for (i, row) in rows.into_iter().enumerate() {
            for (j, v) in row.into_iter().enumerate() {
                table.insert(vec![i as i64, j as i64], v);
            }
        }
        ParamValue::Table(table)
    }

    /// Index arity: 0 for scalars, 1 for lists, key length for tables.
    /// `None` when table keys have mixed arity.
    pub fn arity(&self) -> Option<usize> {
        match self {
            ParamValue::Scalar(_) => Some(0),
            ParamValue::List(_) => Some(1),
            ParamValue::Table(t) => {
                let mut keys = t.keys().map(Vec::len);
                let first = keys.next().unwrap_or(1);
                keys.all(|k| k == first).then_some(first)
            }
        }
    }

    pub fn get(&self, index: &[i64]) -> Result<f64, ParamLookupError> {
        match self {
            ParamValue::Scalar(v) => {
                if index.is_empty() {
                    Ok(*v)
                } else {
                    Err(ParamLookupError::WrongArity { expected: 0, got: index.len() })
                }
            }
            ParamValue::List(xs) => match index {
                [i] if *i >= 0 && (*i as usize) < xs.len() => Ok(xs[*i as usize]),
                [_] => Err(ParamLookupError::OutOfRange),
                _ => Err(ParamLookupError::WrongArity { expected: 1, got: index.len() }),
            },
            ParamValue::Table(t) => match t.get(index) {
                Some(v) => Ok(*v),
                None => match self.arity() {
                    Some(a) if a != index.len() => Err(ParamLookupError::WrongArity { expected: a, got: index.len() }),
                    _ => Err(ParamLookupError::OutOfRange),
                },
            },
        }
    }

    /// Values produced when the parameter is used as a comprehension iterable:
    /// list elements, or the keys of an arity-1 table.
    pub fn iter_values(&self) -> Option<Vec<f64>> {
        match self {
            ParamValue::List(xs) => Some(xs.clone()),
            ParamValue::Table(t) if self.arity() == Some(1) => Some(t.keys().map(|k| k[0] as f64).collect()),
            _ => None,
        }
    }

    fn values(&self) -> Vec<f64> {
        match self {
            ParamValue::Scalar(v) => vec![*v],
            ParamValue::List(xs) => xs.clone(),
            ParamValue::Table(t) => t.values().copied().collect(),
        }
    }
}

/// Named constants, kept in the order they were written.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParameterTable {
    pub entries: IndexMap<String, Parameter>,
}

impl ParameterTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: ParamValue, comment: impl Into<String>) {
        self.entries.insert(name.into(), Parameter { value, comment: comment.into() });
    }

    pub fn with(mut self, name: impl Into<String>, value: ParamValue) -> Self {
        self.insert(name, value, "");
        self
    }

    pub fn get(&self, name: &str) -> Option<&ParamValue> {
        self.entries.get(name).map(|p| &p.value)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn lookup(&self, name: &str, index: &[i64]) -> Result<f64, ParamLookupError> {
        self.get(name).ok_or(ParamLookupError::Unknown)?.get(index)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VarKind {
    Continuous,
    Integer,
    Binary,
}

impl VarKind {
    /// Accepts `GRB.CONTINUOUS`-style solver constants as well as plain names.
    pub fn parse(text: &str) -> Option<VarKind> {
        let t = text.trim().trim_matches(|c| c == '"' || c == '\'');
        let t = t.strip_prefix("GRB.").or_else(|| t.strip_prefix("gp.GRB.")).unwrap_or(t);
        match t.to_ascii_lowercase().as_str() {
            "continuous" | "real" | "float" => Some(VarKind::Continuous),
            "integer" | "int" => Some(VarKind::Integer),
            "binary" | "bool" => Some(VarKind::Binary),
            _ => None,
        }
    }

    pub fn grb_name(self) -> &'static str {
        match self {
            VarKind::Continuous => "GRB.CONTINUOUS",
            VarKind::Integer => "GRB.INTEGER",
            VarKind::Binary => "GRB.BINARY",
        }
    }

    pub fn is_integral(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionVariableDecl {
    pub name: String,
    pub description: String,
    pub kind: VarKind,
    pub iteration_space: Option<String>,
    /// Defaults to 0; `-inf` for free variables.
    pub lower_bound: f64,
    pub upper_bound: Option<f64>,
}

impl DecisionVariableDecl {
    pub fn new(name: impl Into<String>, kind: VarKind) -> Self {
        DecisionVariableDecl {
            name: name.into(),
            description: String::new(),
            kind,
            iteration_space: None,
            lower_bound: 0.0,
            upper_bound: None,
        }
    }

    pub fn indexed(mut self, space: impl Into<String>) -> Self {
        self.iteration_space = Some(space.into());
        self
    }

    pub fn bounds(mut self, lower: f64, upper: Option<f64>) -> Self {
        self.lower_bound = lower;
        self.upper_bound = upper;
        self
    }

    /// Bounds after applying the kind (binary variables live in [0, 1]).
    pub fn effective_bounds(&self) -> (f64, f64) {
        let ub = self.upper_bound.unwrap_or(f64::INFINITY);
        match self.kind {
            VarKind::Binary => (self.lower_bound.max(0.0), ub.min(1.0)),
            _ => (self.lower_bound, ub),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sense {
    Min,
    Max,
}

impl Sense {
    pub fn key(self) -> &'static str {
        match self {
            Sense::Min => "min",
            Sense::Max => "max",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveSpec {
    pub sense: Sense,
    pub expression: String,
}

impl ObjectiveSpec {
    pub fn new(sense: Sense, expression: impl Into<String>) -> Self {
        ObjectiveSpec { sense, expression: expression.into() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ConstraintKind {
    Equality,
    Inequality,
}

/// Named constraint strings of one kind. An empty set stands for the
/// `{None: None}` sentinel ("no constraints of this kind").
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet {
    pub kind: ConstraintKind,
    pub entries: IndexMap<String, String>,
}

impl ConstraintSet {
    pub fn empty(kind: ConstraintKind) -> Self {
        ConstraintSet { kind, entries: IndexMap::new() }
    }

    pub fn from_pairs<K: Into<String>, V: Into<String>>(kind: ConstraintKind, pairs: impl IntoIterator<Item = (K, V)>) -> Self {
        ConstraintSet { kind, entries: pairs.into_iter().map(|(k, v)| (k.into(), v.into())).collect() }
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// A complete formulation.
#[derive(Debug, Clone, PartialEq)]
pub struct Formulation {
    pub parameters: ParameterTable,
    pub variables: Vec<DecisionVariableDecl>,
    pub objective: ObjectiveSpec,
    pub equalities: ConstraintSet,
    pub inequalities: ConstraintSet,
}

/// One search level's payload.
#[derive(Debug, Clone, PartialEq)]
pub enum Component {
    /// Level 1: parameters together with the decision variables built on them.
    Variables { parameters: ParameterTable, variables: Vec<DecisionVariableDecl> },
    Objective(ObjectiveSpec),
    Equalities(ConstraintSet),
    Inequalities(ConstraintSet),
}

impl Component {
    pub fn depth(&self) -> u8 {
        match self {
            Component::Variables { .. } => 1,
            Component::Objective(_) => 2,
            Component::Equalities(_) => 3,
            Component::Inequalities(_) => 4,
        }
    }
}

/// A formulation built up to `depth` components; components past the depth
/// marker are absent.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PartialFormulation {
    pub parameters: ParameterTable,
    pub variables: Vec<DecisionVariableDecl>,
    pub objective: Option<ObjectiveSpec>,
    pub equalities: Option<ConstraintSet>,
    pub inequalities: Option<ConstraintSet>,
    depth: u8,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("component at depth {got} cannot extend a partial formulation of depth {depth}")]
pub struct DepthError {
    pub depth: u8,
    pub got: u8,
}

impl PartialFormulation {
    pub fn root() -> Self {
        Self::default()
    }

    pub fn depth(&self) -> u8 {
        self.depth
    }

    /// Appends the next component. Fails unless `c` is exactly one level deeper.
    pub fn push(&mut self, c: Component) -> Result<(), DepthError> {
        if c.depth() != self.depth + 1 {
            return Err(DepthError { depth: self.depth, got: c.depth() });
        }
        match c {
            Component::Variables { parameters, variables } => {
                self.parameters = parameters;
                self.variables = variables;
            }
            Component::Objective(o) => self.objective = Some(o),
            Component::Equalities(s) => self.equalities = Some(s),
            Component::Inequalities(s) => self.inequalities = Some(s),
        }
        self.depth += 1;
        Ok(())
    }

    pub fn extended(&self, c: Component) -> Result<Self, DepthError> {
        let mut next = self.clone();
        next.push(c)?;
        Ok(next)
    }

    pub fn from_components<'a>(cs: impl IntoIterator<Item = &'a Component>) -> Result<Self, DepthError> {
        let mut p = Self::root();
        for c in cs {
            p.push(c.clone())?;
        }
        Ok(p)
    }

    pub fn to_formulation(&self) -> Option<Formulation> {
        if self.depth < 4 {
            return None;
        }
        Some(Formulation {
            parameters: self.parameters.clone(),
            variables: self.variables.clone(),
            objective: self.objective.clone()?,
            equalities: self.equalities.clone()?,
            inequalities: self.inequalities.clone()?,
        })
    }
}

impl From<Formulation> for PartialFormulation {
    fn from(f: Formulation) -> Self {
        PartialFormulation {
            parameters: f.parameters,
            variables: f.variables,
            objective: Some(f.objective),
            equalities: Some(f.equalities),
            inequalities: Some(f.inequalities),
            depth: 4,
        }
    }
}

impl Formulation {
    pub fn components(&self) -> [Component; 4] {
        [
            Component::Variables { parameters: self.parameters.clone(), variables: self.variables.clone() },
            Component::Objective(self.objective.clone()),
            Component::Equalities(self.equalities.clone()),
            Component::Inequalities(self.inequalities.clone()),
        ]
    }
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ComponentName {
    Parameters,
    DecisionVariables,
    Objective,
    EqualityConstraints,
    InequalityConstraints,
}

impl fmt::Display for ComponentName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ComponentName::Parameters => "parameters",
            ComponentName::DecisionVariables => "decision_variables",
            ComponentName::Objective => "objective",
            ComponentName::EqualityConstraints => "equality_constraints",
            ComponentName::InequalityConstraints => "inequality_constraints",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Violation {
    pub component: ComponentName,
    pub entry: Option<String>,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}[{}]: {}", self.component, self.entry.as_deref().unwrap_or("·"), self.rule)
    }
}

const KEYWORDS: [&str; 4] = ["sum", "for", "in", "range"];

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_') && !KEYWORDS.contains(&s)
}

/// Checks every schema invariant of a complete formulation.
pub fn validate(f: &Formulation) -> Vec<Violation> {
    validate_partial(&PartialFormulation::from(f.clone()))
}

/// Checks the invariants of the components present at the partial's depth.
pub fn validate_partial(p: &PartialFormulation) -> Vec<Violation> {
    let mut out = Vec::new();
    let v = |component, entry: Option<&str>, rule: String| Violation { component, entry: entry.map(str::to_string), rule };

    for (name, param) in &p.parameters.entries {
        if !is_identifier(name) {
            out.push(v(ComponentName::Parameters, Some(name), "name is not a valid identifier".into()));
        }
        match param.value.arity() {
            None => out.push(v(ComponentName::Parameters, Some(name), "table keys have mixed index arity".into())),
            Some(a) if a > 2 => out.push(v(ComponentName::Parameters, Some(name), format!("index arity {a} exceeds 2"))),
            Some(0) if matches!(param.value, ParamValue::Table(_)) => {
                out.push(v(ComponentName::Parameters, Some(name), "table keys must be non-empty index tuples".into()))
            }
            _ => {}
        }
        if param.value.values().iter().any(|x| !x.is_finite()) {
            out.push(v(ComponentName::Parameters, Some(name), "value is not finite".into()));
        }
    }

    let mut seen: Vec<&str> = Vec::new();
    for decl in &p.variables {
        let name = decl.name.as_str();
        if !is_identifier(name) {
            out.push(v(ComponentName::DecisionVariables, Some(name), "name is not a valid identifier".into()));
        }
        if seen.contains(&name) {
            out.push(v(ComponentName::DecisionVariables, Some(name), "duplicate variable name".into()));
        }
        seen.push(name);
        if p.parameters.contains(name) {
            out.push(v(ComponentName::DecisionVariables, Some(name), "name shadows a parameter".into()));
        }
        if let Some(space) = &decl.iteration_space {
            match parse_iteration_space(space) {
                Ok(comps) => {
                    let mut bound = Vec::new();
                    let mut free = Vec::new();
                    for c in &comps {
                        c.iterable.free_identifiers(&mut bound, &mut free);
                        bound.push(c.var.clone());
                    }
                    for id in free {
                        if !p.parameters.contains(&id) {
                            out.push(v(ComponentName::DecisionVariables, Some(name), format!("unresolved identifier {id}")));
                        }
                    }
                }
                Err(e) => out.push(v(ComponentName::DecisionVariables, Some(name), format!("iteration space: {e}"))),
            }
        }
        let (lb, ub) = (decl.lower_bound, decl.upper_bound.unwrap_or(f64::INFINITY));
        if lb.is_nan() || ub.is_nan() || lb > ub || lb == f64::INFINITY {
            out.push(v(ComponentName::DecisionVariables, Some(name), "lower bound exceeds upper bound".into()));
        }
    }

    let resolves = |id: &str| p.parameters.contains(id) || p.variables.iter().any(|d| d.name == id);

    if let Some(obj) = &p.objective {
        let entry = Some(obj.sense.key());
        match parse_expression(&obj.expression) {
            Ok(e) => {
                let mut free = Vec::new();
                e.free_identifiers(&mut Vec::new(), &mut free);
                for id in dedup(free) {
                    if !resolves(&id) {
                        out.push(v(ComponentName::Objective, entry, format!("unresolved identifier {id}")));
                    }
                }
            }
            Err(e) => out.push(v(ComponentName::Objective, entry, e.to_string())),
        }
    }

    for (set, component) in [(&p.equalities, ComponentName::EqualityConstraints), (&p.inequalities, ComponentName::InequalityConstraints)] {
        let Some(set) = set else { continue };
        let expected_kind = match component {
            ComponentName::EqualityConstraints => ConstraintKind::Equality,
            _ => ConstraintKind::Inequality,
        };
        if set.kind != expected_kind {
            out.push(v(component, None, format!("constraint set has kind {:?}", set.kind)));
        }
        for (name, text) in &set.entries {
            match parse_relation(text) {
                Ok(rel) => {
                    let op_ok = match set.kind {
                        ConstraintKind::Equality => rel.relation.op == RelOp::Eq,
                        ConstraintKind::Inequality => rel.relation.op != RelOp::Eq,
                    };
                    if !op_ok {
                        let rule = match set.kind {
                            ConstraintKind::Equality => "relation must be ==",
                            ConstraintKind::Inequality => "relation must be <= or >=",
                        };
                        out.push(v(component, Some(name), rule.into()));
                    }
                    for id in dedup(rel.free_identifiers()) {
                        if !resolves(&id) {
                            out.push(v(component, Some(name), format!("unresolved identifier {id}")));
                        }
                    }
                }
                Err(e) => out.push(v(component, Some(name), e.to_string())),
            }
        }
    }

    let d = p.depth();
    let present = [
        (2, p.objective.is_some(), ComponentName::Objective),
        (3, p.equalities.is_some(), ComponentName::EqualityConstraints),
        (4, p.inequalities.is_some(), ComponentName::InequalityConstraints),
    ];
    for (level, is_present, component) in present {
        if is_present != (d >= level) {
            out.push(v(component, None, format!("presence does not match depth marker {d}")));
        }
    }
    if d == 0 && (!p.variables.is_empty() || !p.parameters.is_empty()) {
        out.push(v(ComponentName::DecisionVariables, None, "presence does not match depth marker 0".into()));
    }
    out
}

fn dedup(ids: Vec<String>) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for id in ids {
        if !out.contains(&id) {
            out.push(id);
        }
    }
    out
}

// ---------------------------------------------------------------------------
// JSON (de)serialization

#[derive(Debug, Clone, PartialEq, Error)]
#[error("schema error at {path}: {message}")]
pub struct SchemaError {
    pub path: String,
    pub message: String,
}

impl SchemaError {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        SchemaError { path: path.into(), message: message.into() }
    }
}

fn format_key(key: &[i64]) -> String {
    match key {
        [i] => i.to_string(),
        _ => format!("({})", key.iter().map(i64::to_string).collect::<Vec<_>>().join(", ")),
    }
}

/// Parses `"3"`, `"(0, 1)"` or `"0,1"` into an index tuple.
pub fn parse_key(s: &str) -> Option<Vec<i64>> {
    let inner = s.trim().trim_start_matches('(').trim_end_matches(')');
    let parts: Option<Vec<i64>> = inner.split(',').map(|p| p.trim()).filter(|p| !p.is_empty()).map(|p| p.parse().ok()).collect();
    parts.filter(|v| !v.is_empty())
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ValueDoc {
    Number(f64),
    List(Vec<f64>),
    Rows(Vec<Vec<f64>>),
    Map(IndexMap<String, f64>),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum ParamDoc {
    Full {
        value: ValueDoc,
        #[serde(default)]
        comment: String,
    },
    Bare(ValueDoc),
}

impl ParamValue {
    fn to_doc(&self) -> ValueDoc {
        match self {
            ParamValue::Scalar(v) => ValueDoc::Number(*v),
            ParamValue::List(xs) => ValueDoc::List(xs.clone()),
            ParamValue::Table(t) => ValueDoc::Map(t.iter().map(|(k, v)| (format_key(k), *v)).collect()),
        }
    }

    fn from_doc(doc: ValueDoc) -> Result<ParamValue, String> {
        Ok(match doc {
            ValueDoc::Number(v) => ParamValue::Scalar(v),
            ValueDoc::List(xs) => ParamValue::List(xs),
            ValueDoc::Rows(rows) => ParamValue::from_rows(rows),
            ValueDoc::Map(m) => {
                let mut t = BTreeMap::new();
                for (k, v) in m {
                    let key = parse_key(&k).ok_or_else(|| format!("table key `{k}` is not an integer index tuple"))?;
                    t.insert(key, v);
                }
                ParamValue::Table(t)
            }
        })
    }
}

impl Serialize for ParameterTable {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let doc: IndexMap<&str, ParamDoc> = self
            .entries
            .iter()
            .map(|(k, p)| (k.as_str(), ParamDoc::Full { value: p.value.to_doc(), comment: p.comment.clone() }))
            .collect();
        doc.serialize(s)
    }
}

impl<'de> Deserialize<'de> for ParameterTable {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = IndexMap::<String, ParamDoc>::deserialize(d)?;
        let mut table = ParameterTable::new();
        for (name, p) in doc {
            let (value, comment) = match p {
                ParamDoc::Full { value, comment } => (value, comment),
                ParamDoc::Bare(value) => (value, String::new()),
            };
            let value = ParamValue::from_doc(value).map_err(serde::de::Error::custom)?;
            table.insert(name, value, comment);
        }
        Ok(table)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum BoundDoc {
    Number(f64),
    Text(String),
}

fn bound_to_doc(v: f64) -> BoundDoc {
    if v.is_finite() {
        BoundDoc::Number(v)
    } else if v > 0.0 {
        BoundDoc::Text("inf".into())
    } else {
        BoundDoc::Text("-inf".into())
    }
}

fn bound_from_doc(doc: BoundDoc) -> Result<f64, String> {
    match doc {
        BoundDoc::Number(v) => Ok(v),
        BoundDoc::Text(t) => match t.trim() {
            "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
            "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
            other => Err(format!("bound `{other}` is not a number")),
        },
    }
}

#[derive(Serialize, Deserialize)]
struct VarDoc {
    #[serde(default)]
    description: String,
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    iteration_space: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lower_bound: Option<BoundDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    upper_bound: Option<BoundDoc>,
}

fn vars_to_doc(vars: &[DecisionVariableDecl]) -> IndexMap<String, VarDoc> {
    vars.iter()
        .map(|d| {
            let doc = VarDoc {
                description: d.description.clone(),
                kind: d.kind.grb_name().to_string(),
                iteration_space: d.iteration_space.clone(),
                lower_bound: (d.lower_bound != 0.0).then(|| bound_to_doc(d.lower_bound)),
                upper_bound: d.upper_bound.map(bound_to_doc),
            };
            (d.name.clone(), doc)
        })
        .collect()
}

fn vars_from_doc(doc: IndexMap<String, VarDoc>) -> Result<Vec<DecisionVariableDecl>, SchemaError> {
    let mut out = Vec::new();
    for (name, d) in doc {
        let path = format!("$.decision_variables.{name}");
        let kind = VarKind::parse(&d.kind).ok_or_else(|| SchemaError::new(format!("{path}.type"), format!("unknown variable type `{}`", d.kind)))?;
        let lower_bound = match d.lower_bound {
            Some(b) => bound_from_doc(b).map_err(|m| SchemaError::new(format!("{path}.lower_bound"), m))?,
            None => 0.0,
        };
        let upper_bound = match d.upper_bound {
            Some(b) => Some(bound_from_doc(b).map_err(|m| SchemaError::new(format!("{path}.upper_bound"), m))?).filter(|u| *u != f64::INFINITY),
            None => None,
        };
        let iteration_space = d.iteration_space.filter(|s| !s.trim().is_empty() && s.trim() != "None");
        out.push(DecisionVariableDecl { name, description: d.description, kind, iteration_space, lower_bound, upper_bound });
    }
    Ok(out)
}

fn objective_to_doc(o: &ObjectiveSpec) -> IndexMap<String, String> {
    IndexMap::from([(o.sense.key().to_string(), o.expression.clone())])
}

fn objective_from_doc(doc: IndexMap<String, String>, path: &str) -> Result<ObjectiveSpec, SchemaError> {
    if doc.len() != 1 {
        return Err(SchemaError::new(path, "objective must have exactly one key, 'min' or 'max'"));
    }
    let (k, v) = doc.into_iter().next().expect("one entry");
    let sense = match k.as_str() {
        "min" => Sense::Min,
        "max" => Sense::Max,
        other => return Err(SchemaError::new(path, format!("objective key must be 'min' or 'max', got `{other}`"))),
    };
    Ok(ObjectiveSpec { sense, expression: v })
}

const SENTINEL_KEY: &str = "None";

fn constraints_to_doc(c: &ConstraintSet) -> IndexMap<String, Option<String>> {
    if c.is_empty() {
        IndexMap::from([(SENTINEL_KEY.to_string(), None)])
    } else {
        c.entries.iter().map(|(k, v)| (k.clone(), Some(v.clone()))).collect()
    }
}

fn constraints_from_doc(kind: ConstraintKind, doc: IndexMap<String, Option<String>>, path: &str) -> Result<ConstraintSet, SchemaError> {
    if doc.len() == 1 && doc.get(SENTINEL_KEY).is_some_and(Option::is_none) {
        return Ok(ConstraintSet::empty(kind));
    }
    let mut entries = IndexMap::new();
    for (k, v) in doc {
        match v {
            Some(v) => {
                entries.insert(k, v);
            }
            None => return Err(SchemaError::new(format!("{path}.{k}"), "the {None: None} sentinel must be the only entry")),
        }
    }
    Ok(ConstraintSet { kind, entries })
}

#[derive(Serialize, Deserialize)]
struct FormulationDoc {
    parameters: ParameterTable,
    decision_variables: IndexMap<String, VarDoc>,
    objective: IndexMap<String, String>,
    equality_constraints: IndexMap<String, Option<String>>,
    inequality_constraints: IndexMap<String, Option<String>>,
}

const TOP_LEVEL_KEYS: [&str; 5] = ["parameters", "decision_variables", "objective", "equality_constraints", "inequality_constraints"];

impl Serialize for Formulation {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        FormulationDoc {
            parameters: self.parameters.clone(),
            decision_variables: vars_to_doc(&self.variables),
            objective: objective_to_doc(&self.objective),
            equality_constraints: constraints_to_doc(&self.equalities),
            inequality_constraints: constraints_to_doc(&self.inequalities),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Formulation {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let value = serde_json::Value::deserialize(d)?;
        Formulation::from_value(value).map_err(serde::de::Error::custom)
    }
}

fn typed<T: serde::de::DeserializeOwned>(value: serde_json::Value, base: &str) -> Result<T, SchemaError> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let inner = e.path().to_string();
        let path = if inner == "." || inner.is_empty() { base.to_string() } else { format!("{base}.{inner}") };
        SchemaError::new(path, e.into_inner().to_string())
    })
}

impl Formulation {
    pub fn from_value(value: serde_json::Value) -> Result<Self, SchemaError> {
        let obj = value.as_object().ok_or_else(|| SchemaError::new("$", "expected a JSON object"))?;
        for key in TOP_LEVEL_KEYS {
            if !obj.contains_key(key) {
                return Err(SchemaError::new(format!("$.{key}"), "missing required key"));
            }
        }
        if let Some(extra) = obj.keys().find(|k| !TOP_LEVEL_KEYS.contains(&k.as_str())) {
            return Err(SchemaError::new(format!("$.{extra}"), "unknown key"));
        }
        let mut obj = obj.clone();
        let mut take = |k: &str| obj.remove(k).expect("checked above");
        let parameters = typed(take("parameters"), "$.parameters")?;
        let variables = vars_from_doc(typed(take("decision_variables"), "$.decision_variables")?)?;
        let objective = objective_from_doc(typed(take("objective"), "$.objective")?, "$.objective")?;
        let equalities = constraints_from_doc(ConstraintKind::Equality, typed(take("equality_constraints"), "$.equality_constraints")?, "$.equality_constraints")?;
        let inequalities =
            constraints_from_doc(ConstraintKind::Inequality, typed(take("inequality_constraints"), "$.inequality_constraints")?, "$.inequality_constraints")?;
        Ok(Formulation { parameters, variables, objective, equalities, inequalities })
    }

    pub fn to_json_bytes(&self) -> Vec<u8> {
        serde_json::to_vec_pretty(self).expect("formulation serializes")
    }
}

/// Serializes to pretty-printed JSON using the five top-level keys.
pub fn serialize(f: &Formulation) -> Vec<u8> {
    f.to_json_bytes()
}

/// Parses UTF-8 JSON bytes into a formulation.
pub fn deserialize(bytes: &[u8]) -> Result<Formulation, SchemaError> {
    let text = std::str::from_utf8(bytes).map_err(|e| SchemaError::new("$", format!("input is not UTF-8: {e}")))?;
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| SchemaError::new("$", e.to_string()))?;
    Formulation::from_value(value)
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "stage", rename_all = "snake_case")]
enum ComponentDoc {
    Variables { parameters: ParameterTable, decision_variables: IndexMap<String, VarDoc> },
    Objective { objective: IndexMap<String, String> },
    EqualityConstraints { equality_constraints: IndexMap<String, Option<String>> },
    InequalityConstraints { inequality_constraints: IndexMap<String, Option<String>> },
}

impl Serialize for Component {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Component::Variables { parameters, variables } => {
                ComponentDoc::Variables { parameters: parameters.clone(), decision_variables: vars_to_doc(variables) }
            }
            Component::Objective(o) => ComponentDoc::Objective { objective: objective_to_doc(o) },
            Component::Equalities(c) => ComponentDoc::EqualityConstraints { equality_constraints: constraints_to_doc(c) },
            Component::Inequalities(c) => ComponentDoc::InequalityConstraints { inequality_constraints: constraints_to_doc(c) },
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Component {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = ComponentDoc::deserialize(d)?;
        let r = match doc {
            ComponentDoc::Variables { parameters, decision_variables } => {
                vars_from_doc(decision_variables).map(|variables| Component::Variables { parameters, variables })
            }
            ComponentDoc::Objective { objective } => objective_from_doc(objective, "$.objective").map(Component::Objective),
            ComponentDoc::EqualityConstraints { equality_constraints } => {
                constraints_from_doc(ConstraintKind::Equality, equality_constraints, "$.equality_constraints").map(Component::Equalities)
            }
            ComponentDoc::InequalityConstraints { inequality_constraints } => {
                constraints_from_doc(ConstraintKind::Inequality, inequality_constraints, "$.inequality_constraints").map(Component::Inequalities)
            }
        };
        r.map_err(serde::de::Error::custom)
    }
}

/// Collects the identifiers a constraint or objective string references,
/// for callers that only need name resolution.
pub fn referenced_identifiers(text: &str) -> Result<Vec<String>, expr::ParseError> {
    if let Ok(rel) = parse_relation(text) {
        return Ok(dedup(rel.free_identifiers()));
    }
    let e = parse_expression(text)?;
    let mut out = Vec::new();
    e.free_identifiers(&mut Vec::new(), &mut out);
    Ok(dedup(out))
}
