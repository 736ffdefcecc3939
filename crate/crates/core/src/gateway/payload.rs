//! Conversion between model components and the Python dict notation the
//! prompts use, and extraction of the answer block from a completion.

use std::collections::BTreeMap;

use crate::model::{
    Component, ConstraintKind, ConstraintSet, DecisionVariableDecl, ObjectiveSpec, ParamValue, ParameterTable, PartialFormulation, Sense,
    VarKind,
};

use super::pyliteral::{last_assignment, DictEntry, PyValue};
use super::Phase;

fn number(v: f64) -> PyValue {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        PyValue::Int(v as i64)
    } else {
        PyValue::Float(v)
    }
}

fn key_value(key: &[i64]) -> PyValue {
    match key {
        [i] => PyValue::Int(*i),
        _ => PyValue::Tuple(key.iter().map(|&i| PyValue::Int(i)).collect()),
    }
}

pub fn param_value_to_py(v: &ParamValue) -> PyValue {
    match v {
        ParamValue::Scalar(x) => number(*x),
        ParamValue::List(xs) => PyValue::List(xs.iter().map(|&x| number(x)).collect()),
        ParamValue::Table(t) => PyValue::Dict(t.iter().map(|(k, &x)| DictEntry::new(key_value(k), number(x))).collect()),
    }
}

pub fn parameters_to_py(p: &ParameterTable) -> PyValue {
    PyValue::Dict(
        p.entries
            .iter()
            .map(|(name, param)| DictEntry::commented(PyValue::str(name), param_value_to_py(&param.value), param.comment.clone()))
            .collect(),
    )
}

fn bound_to_py(v: f64) -> PyValue {
    if v.is_finite() {
        number(v)
    } else if v > 0.0 {
        PyValue::Name("GRB.INFINITY".into())
    } else {
        PyValue::Name("-GRB.INFINITY".into())
    }
}

pub fn variables_to_py(vars: &[DecisionVariableDecl]) -> PyValue {
    PyValue::Dict(
        vars.iter()
            .map(|d| {
                let mut fields = vec![
                    DictEntry::new(PyValue::str("description"), PyValue::str(&d.description)),
                    DictEntry::new(PyValue::str("type"), PyValue::str(d.kind.grb_name())),
                    DictEntry::new(PyValue::str("iteration_space"), d.iteration_space.as_deref().map_or(PyValue::None, PyValue::str)),
                ];
                if d.lower_bound != 0.0 {
                    fields.push(DictEntry::new(PyValue::str("lower_bound"), bound_to_py(d.lower_bound)));
                }
                if let Some(u) = d.upper_bound {
                    fields.push(DictEntry::new(PyValue::str("upper_bound"), bound_to_py(u)));
                }
                DictEntry::new(PyValue::str(&d.name), PyValue::Dict(fields))
            })
            .collect(),
    )
}

pub fn objective_to_py(o: &ObjectiveSpec) -> PyValue {
    PyValue::Dict(vec![DictEntry::new(PyValue::str(o.sense.key()), PyValue::str(&o.expression))])
}

pub fn constraints_to_py(c: &ConstraintSet) -> PyValue {
    if c.is_empty() {
        return PyValue::Dict(vec![DictEntry::new(PyValue::None, PyValue::None)]);
    }
    PyValue::Dict(c.entries.iter().map(|(k, v)| DictEntry::new(PyValue::str(k), PyValue::str(v))).collect())
}

/// The dict a candidate is shown as in rank and group prompts.
pub fn component_to_py(c: &Component) -> PyValue {
    match c {
        Component::Variables { parameters, variables } => PyValue::Dict(vec![
            DictEntry::new(PyValue::str("parameters"), parameters_to_py(parameters)),
            DictEntry::new(PyValue::str("decision_variables"), variables_to_py(variables)),
        ]),
        Component::Objective(o) => objective_to_py(o),
        Component::Equalities(s) | Component::Inequalities(s) => constraints_to_py(s),
    }
}

/// The five-key `formalization_dict`; components not yet chosen are `{}`.
pub fn formalization_to_py(p: &PartialFormulation) -> PyValue {
    let empty = || PyValue::Dict(Vec::new());
    let entry = |k: &str, v: PyValue| DictEntry::new(PyValue::str(k), v);
    PyValue::Dict(vec![
        entry("parameters", parameters_to_py(&p.parameters)),
        entry("decision_variables", variables_to_py(&p.variables)),
        entry("objective", p.objective.as_ref().map_or_else(empty, objective_to_py)),
        entry("equality_constraints", p.equalities.as_ref().map_or_else(empty, constraints_to_py)),
        entry("inequality_constraints", p.inequalities.as_ref().map_or_else(empty, constraints_to_py)),
    ])
}

// ---------------------------------------------------------------------------
// Reading payloads back

/// Flattens nested lists and int/tuple-keyed dicts into index paths.
fn flatten(v: &PyValue, prefix: &mut Vec<i64>, out: &mut Vec<(Vec<i64>, f64)>) -> Option<()> {
    match v {
        PyValue::Int(_) | PyValue::Float(_) => out.push((prefix.clone(), v.as_f64()?)),
        PyValue::List(items) | PyValue::Tuple(items) => {
            for (i, item) in items.iter().enumerate() {
                prefix.push(i as i64);
                flatten(item, prefix, out)?;
                prefix.pop();
            }
        }
        PyValue::Dict(entries) => {
            for e in entries {
                let key: Vec<i64> = match &e.key {
                    PyValue::Int(i) => vec![*i],
                    PyValue::Tuple(items) => items.iter().map(|k| if let PyValue::Int(i) = k { Some(*i) } else { None }).collect::<Option<_>>()?,
                    _ => return None,
                };
                let depth = prefix.len();
                prefix.extend(key);
                flatten(&e.value, prefix, out)?;
                prefix.truncate(depth);
            }
        }
        _ => return None,
    }
    Some(())
}

/// Numeric parameter data; `None` for anything non-numeric.
pub fn param_value_from_py(v: &PyValue) -> Option<ParamValue> {
    if let Some(x) = v.as_f64() {
        return Some(ParamValue::Scalar(x));
    }
    if let PyValue::List(items) = v {
        if let Some(xs) = items.iter().map(PyValue::as_f64).collect::<Option<Vec<f64>>>() {
            return Some(ParamValue::List(xs));
        }
    }
    let mut flat = Vec::new();
    flatten(v, &mut Vec::new(), &mut flat)?;
    if flat.is_empty() {
        return None;
    }
    Some(ParamValue::Table(flat.into_iter().collect::<BTreeMap<_, _>>()))
}

/// Parameter dict. Non-numeric entries (strings, nested records) are
/// dropped because parameters are restricted to numeric data.
pub fn parameters_from_py(v: &PyValue) -> Option<ParameterTable> {
    let mut table = ParameterTable::new();
    for e in v.as_dict()? {
        let name = e.key.as_str()?;
        match param_value_from_py(&e.value) {
            Some(value) => table.insert(name, value, e.comment.clone().unwrap_or_default()),
            None => log::debug!("dropping non-numeric parameter `{name}`"),
        }
    }
    Some(table)
}

fn bound_from_py(v: &PyValue) -> Option<Option<f64>> {
    match v {
        PyValue::None => Some(None),
        PyValue::Name(n) if n.ends_with("INFINITY") || n.ends_with("inf") => Some(Some(if n.starts_with('-') { f64::NEG_INFINITY } else { f64::INFINITY })),
        PyValue::Str(s) => match s.trim() {
            "inf" | "+inf" | "infinity" => Some(Some(f64::INFINITY)),
            "-inf" | "-infinity" => Some(Some(f64::NEG_INFINITY)),
            _ => None,
        },
        _ => v.as_f64().map(Some),
    }
}

pub fn variables_from_py(v: &PyValue) -> Option<Vec<DecisionVariableDecl>> {
    let mut out = Vec::new();
    for e in v.as_dict()? {
        let name = e.key.as_str()?;
        let kind = match e.value.get("type")? {
            PyValue::Str(s) | PyValue::Name(s) => VarKind::parse(s)?,
            _ => return None,
        };
        let mut d = DecisionVariableDecl::new(name, kind);
        d.description = e.value.get("description").and_then(PyValue::as_str).unwrap_or_default().to_string();
        d.iteration_space = match e.value.get("iteration_space") {
            None | Some(PyValue::None) => None,
            Some(PyValue::Str(s)) if s.trim().is_empty() || s.trim() == "None" => None,
            Some(PyValue::Str(s)) => Some(s.clone()),
            Some(_) => return None,
        };
        if let Some(b) = e.value.get("lower_bound") {
            d.lower_bound = bound_from_py(b)?.unwrap_or(0.0);
        }
        if let Some(b) = e.value.get("upper_bound") {
            d.upper_bound = bound_from_py(b)?.filter(|u| *u != f64::INFINITY);
        }
        out.push(d);
    }
    Some(out)
}

pub fn objective_from_py(v: &PyValue) -> Option<ObjectiveSpec> {
    let [e] = v.as_dict()? else { return None };
    let sense = match e.key.as_str()?.trim().to_ascii_lowercase().as_str() {
        "min" => Sense::Min,
        "max" => Sense::Max,
        _ => return None,
    };
    Some(ObjectiveSpec::new(sense, e.value.as_str()?))
}

pub fn constraints_from_py(kind: ConstraintKind, v: &PyValue) -> Option<ConstraintSet> {
    if v.is_none_sentinel() {
        return Some(ConstraintSet::empty(kind));
    }
    let pairs: Option<Vec<(&str, &str)>> = v.as_dict()?.iter().map(|e| Some((e.key.as_str()?, e.value.as_str()?))).collect();
    Some(ConstraintSet::from_pairs(kind, pairs?))
}

fn field_targets(field: &str) -> Vec<String> {
    vec![format!("formalization_dict[\"{field}\"]"), format!("formalization_dict['{field}']")]
}

/// The answer block for a generation phase: the last
/// `formalization_dict["field"] = {...}` in the completion, or failing that
/// the field of the last whole `formalization_dict = {...}`.
pub fn extract_field(response: &str, field: &str) -> Option<PyValue> {
    if let Some(v) = last_assignment(response, &field_targets(field)) {
        return Some(v);
    }
    let whole = last_assignment(response, &["formalization_dict".to_string()])?;
    whole.get(field).cloned()
}

/// What a generation phase parses out of one completion.
#[derive(Debug, Clone, PartialEq)]
pub enum Parsed {
    Parameters(ParameterTable),
    Component(Component),
}

pub fn parse_generation(phase: Phase, response: &str) -> Option<Parsed> {
    let field = phase.field()?;
    let v = extract_field(response, field)?;
    Some(match phase {
        Phase::Parameters => Parsed::Parameters(parameters_from_py(&v)?),
        Phase::Variables => {
            let variables = variables_from_py(&v)?;
            if variables.is_empty() {
                return None;
            }
            Parsed::Component(Component::Variables { parameters: ParameterTable::new(), variables })
        }
        Phase::Objective => Parsed::Component(Component::Objective(objective_from_py(&v)?)),
        Phase::Equalities => Parsed::Component(Component::Equalities(constraints_from_py(ConstraintKind::Equality, &v)?)),
        Phase::Inequalities => Parsed::Component(Component::Inequalities(constraints_from_py(ConstraintKind::Inequality, &v)?)),
        _ => return None,
    })
}

/// Reads a candidate label: `'solution_2'`, `solution_2` or `2`.
pub fn solution_index(v: &PyValue, k: usize) -> Option<usize> {
    let n = match v {
        PyValue::Int(i) => *i,
        PyValue::Str(s) | PyValue::Name(s) => s.trim().strip_prefix("solution_")?.parse().ok()?,
        _ => return None,
    };
    (1..=k as i64).contains(&n).then(|| n as usize - 1)
}

/// Parses `rank = {1: solution_i, ...}` into candidate indices, best first.
/// Must be a permutation of all `k` candidates.
pub fn parse_rank(response: &str, k: usize) -> Option<Vec<usize>> {
    let v = last_assignment(response, &["rank".to_string()])?;
    let mut slots: Vec<(i64, usize)> = Vec::new();
    for e in v.as_dict()? {
        let PyValue::Int(r) = e.key else { return None };
        slots.push((r, solution_index(&e.value, k)?));
    }
    slots.sort_by_key(|&(r, _)| r);
    let ranks_ok = slots.iter().enumerate().all(|(i, &(r, _))| r == i as i64 + 1);
    let order: Vec<usize> = slots.into_iter().map(|(_, c)| c).collect();
    let mut seen = vec![false; k];
    for &c in &order {
        if std::mem::replace(&mut seen[c], true) {
            return None;
        }
    }
    (ranks_ok && order.len() == k).then_some(order)
}

/// Parses `groups = {1: [...], ...}` into groups of candidate indices, each
/// sorted, ordered by their earliest member. Every candidate must appear
/// exactly once.
pub fn parse_groups(response: &str, k: usize) -> Option<Vec<Vec<usize>>> {
    let v = last_assignment(response, &["groups".to_string()])?;
    let mut seen = vec![false; k];
    let mut groups = Vec::new();
    for e in v.as_dict()? {
        let members = match &e.value {
            PyValue::List(items) | PyValue::Tuple(items) => items.clone(),
            single => vec![single.clone()],
        };
        let mut g = Vec::new();
        for m in &members {
            let c = solution_index(m, k)?;
            if std::mem::replace(&mut seen[c], true) {
                return None;
            }
            g.push(c);
        }
        if g.is_empty() {
            return None;
        }
        g.sort_unstable();
        groups.push(g);
    }
    if !seen.iter().all(|&s| s) {
        return None;
    }
    groups.sort_by_key(|g| g[0]);
    Some(groups)
}

fn floats(text: &str) -> Vec<f64> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        let starts = c.is_ascii_digit() || (c == '.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit));
        let glued = i > 0 && (bytes[i - 1].is_ascii_alphanumeric() || bytes[i - 1] == b'_');
        if !starts || glued {
            i += 1;
            continue;
        }
        let start = if i > 0 && bytes[i - 1] == b'-' { i - 1 } else { i };
        let mut j = i;
        while j < bytes.len() && (bytes[j].is_ascii_digit() || bytes[j] == b'.') {
            j += 1;
        }
        if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
            let mut k = j + 1;
            if k < bytes.len() && (bytes[k] == b'-' || bytes[k] == b'+') {
                k += 1;
            }
            if k < bytes.len() && bytes[k].is_ascii_digit() {
                j = k;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
            }
        }
        if let Ok(v) = text[start..j].trim_end_matches('.').parse::<f64>() {
            out.push(v);
        }
        i = j;
    }
    out
}

/// The comparison score: the number after the last `score =`, else the
/// first number in the text. Clamped to [0, 1].
pub fn parse_score(response: &str) -> Option<f64> {
    let tail = response.rfind("score =").or_else(|| response.rfind("score="));
    let v = match tail {
        Some(at) => floats(&response[at..]).first().copied().or_else(|| floats(response).first().copied()),
        None => floats(response).first().copied(),
    }?;
    v.is_finite().then(|| v.clamp(0.0, 1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::pyliteral::{parse_literal, to_python_pretty};
    use crate::model::ParamValue;

    fn params() -> ParameterTable {
        let mut p = ParameterTable::new();
        p.insert("capacity", ParamValue::List(vec![3.0, 5.5]), "units per line");
        p.insert("budget", ParamValue::Scalar(100.0), "");
        p.insert("cost", ParamValue::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]), "per pair");
        p
    }

    #[test]
    fn parameters_round_trip_with_comments() {
        let p = params();
        let text = to_python_pretty(&parameters_to_py(&p), 1);
        assert!(text.contains("# units per line\n"), "{text}");
        let back = parameters_from_py(&parse_literal(&text).unwrap()).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn nested_parameter_shapes() {
        let v = parse_literal("{'rows': [[1, 2], [3]], 'by_key': {0: 1.5, 2: 3}, 'nested': {0: {1: 7}}, 'name': 'plant A', 'pairs': {(0, 1): 4}}").unwrap();
        let p = parameters_from_py(&v).unwrap();
        assert_eq!(p.lookup("rows", &[1, 0]), Ok(3.0));
        assert_eq!(p.lookup("by_key", &[2]), Ok(3.0));
        assert_eq!(p.lookup("nested", &[0, 1]), Ok(7.0));
        assert_eq!(p.lookup("pairs", &[0, 1]), Ok(4.0));
        assert!(!p.contains("name"));
    }

    #[test]
    fn variables_accept_names_and_bounds() {
        let text = r#"formalization_dict["decision_variables"] = {
            "x": {"description": "units", "type": GRB.INTEGER, "iteration_space": "for i in range(2)"},
            "s": {"description": "slack", "type": "GRB.CONTINUOUS", "iteration_space": None, "lower_bound": -GRB.INFINITY, "upper_bound": 4},
        }"#;
        let Some(Parsed::Component(Component::Variables { variables, .. })) = parse_generation(Phase::Variables, text) else { panic!() };
        assert_eq!(variables[0].kind, VarKind::Integer);
        assert_eq!(variables[0].iteration_space.as_deref(), Some("for i in range(2)"));
        assert_eq!(variables[1].lower_bound, f64::NEG_INFINITY);
        assert_eq!(variables[1].upper_bound, Some(4.0));
        let again = variables_from_py(&parse_literal(&crate::gateway::pyliteral::to_python(&variables_to_py(&variables))).unwrap()).unwrap();
        assert_eq!(again, variables);
    }

    #[test]
    fn generation_blocks() {
        let obj = "Let me think.\n```python\n# profit\nformalization_dict[\"objective\"] = {\"max\": \"3*x + 2*y\"}\n```";
        assert_eq!(parse_generation(Phase::Objective, obj), Some(Parsed::Component(Component::Objective(ObjectiveSpec::new(Sense::Max, "3*x + 2*y")))));
        assert_eq!(parse_generation(Phase::Objective, "formalization_dict[\"objective\"] = {\"best\": \"x\"}"), None);
        let eq = "formalization_dict['equality_constraints'] = {None: None}";
        assert_eq!(parse_generation(Phase::Equalities, eq), Some(Parsed::Component(Component::Equalities(ConstraintSet::empty(ConstraintKind::Equality)))));
        let whole = "formalization_dict = {\"inequality_constraints\": {\"cap\": \"x <= 4\"}}";
        let Some(Parsed::Component(Component::Inequalities(s))) = parse_generation(Phase::Inequalities, whole) else { panic!() };
        assert_eq!(s.entries["cap"], "x <= 4");
        assert_eq!(parse_generation(Phase::Inequalities, "no dict here"), None);
    }

    #[test]
    fn rank_blocks() {
        assert_eq!(parse_rank("###\nrank = {\n1: solution_2,\n2: 'solution_1',\n3: 3}\n###", 3), Some(vec![1, 0, 2]));
        assert_eq!(parse_rank("rank = {1: solution_2, 2: solution_2}", 2), None);
        assert_eq!(parse_rank("rank = {1: solution_1}", 2), None);
        assert_eq!(parse_rank("rank = {1: solution_4, 2: solution_1}", 2), None);
        assert_eq!(parse_rank("rank = {2: solution_1, 1: solution_2}", 2), Some(vec![1, 0]));
    }

    #[test]
    fn group_blocks() {
        let text = "groups = {\n1: ['solution_3', 'solution_1'],\n2: [solution_2]}";
        assert_eq!(parse_groups(text, 3), Some(vec![vec![0, 2], vec![1]]));
        assert_eq!(parse_groups("groups = {1: ['solution_1']}", 2), None);
        assert_eq!(parse_groups("groups = {1: ['solution_1'], 2: ['solution_1', 'solution_2']}", 2), None);
    }

    #[test]
    fn score_parsing() {
        assert_eq!(parse_score("0.85 because it is better"), Some(0.85));
        assert_eq!(parse_score("Step 1 weighs 2 things.\nscore = 0.7"), Some(0.7));
        assert_eq!(parse_score("score = 1.4"), Some(1.0));
        assert_eq!(parse_score("score = -0.2"), Some(0.0));
        assert_eq!(parse_score("x2 is fine, score = .25"), Some(0.25));
        assert_eq!(parse_score("no number"), None);
    }
}
