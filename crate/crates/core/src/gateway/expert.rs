//! A deterministic stand-in for the LLM, driven by hand-written response
//! pools. Generation phases replay pool responses by ordinal; rank, group
//! and compare answers are derived from per-response quality annotations.
//! Its purpose is authoring replay fixtures, so it never sees ground truth.

use std::collections::HashMap;
use std::path::Path;

use serde::Deserialize;

use crate::model::Component;

use super::backend::{BackendError, CompletionRequest, GeneratorBackend};
use super::payload::{component_to_py, parameters_from_py, parameters_to_py, parse_generation, Parsed};
use super::pyliteral::{assignments, last_assignment, to_python, DictEntry, PyValue};
use super::Phase;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolFile {
    pub problems: Vec<ProblemPool>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemPool {
    pub id: String,
    pub description: String,
    pub stage1: Vec<Stage1Response>,
    pub objective: Vec<PoolResponse>,
    pub equalities: Vec<PoolResponse>,
    pub inequalities: Vec<PoolResponse>,
}

/// A parameters answer and the variables answer that goes with it.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage1Response {
    pub parameters: String,
    pub variables: String,
    #[serde(default = "half")]
    pub quality: f64,
    /// Variable sets sharing a class are grouped together.
    pub class: Option<String>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoolResponse {
    pub response: String,
    #[serde(default = "half")]
    pub quality: f64,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone)]
struct Judged {
    quality: f64,
    class: String,
}

struct Problem {
    pool: ProblemPool,
    /// Inline rendering of each stage-1 parameters answer.
    params_keys: Vec<Option<String>>,
    judged: HashMap<String, Judged>,
}

pub struct SimulatedExpert {
    problems: Vec<Problem>,
}

fn key(c: &Component) -> String {
    to_python(&component_to_py(c))
}

impl Problem {
    fn new(pool: ProblemPool) -> Problem {
        let mut judged = HashMap::new();
        let mut params_keys = Vec::new();
        for (i, item) in pool.stage1.iter().enumerate() {
            let params = match parse_generation(Phase::Parameters, &item.parameters) {
                Some(Parsed::Parameters(p)) => Some(p),
                _ => None,
            };
            params_keys.push(params.as_ref().map(|p| to_python(&parameters_to_py(p))));
            if let (Some(parameters), Some(Parsed::Component(Component::Variables { variables, .. }))) =
                (params, parse_generation(Phase::Variables, &item.variables))
            {
                let class = item.class.clone().unwrap_or_else(|| format!("stage1-{i}"));
                judged.entry(key(&Component::Variables { parameters, variables })).or_insert(Judged { quality: item.quality, class });
            }
        }
        for (phase, items) in [(Phase::Objective, &pool.objective), (Phase::Equalities, &pool.equalities), (Phase::Inequalities, &pool.inequalities)] {
            for item in items {
                if let Some(Parsed::Component(c)) = parse_generation(phase, &item.response) {
                    let k = key(&c);
                    judged.entry(k.clone()).or_insert(Judged { quality: item.quality, class: k });
                }
            }
        }
        Problem { pool, params_keys, judged }
    }

    fn judge(&self, v: &PyValue) -> Judged {
        let k = to_python(v);
        self.judged.get(&k).cloned().unwrap_or(Judged { quality: 0.0, class: k })
    }

    /// Mean component quality of a rendered `formalization_dict`.
    fn formulation_quality(&self, f: &PyValue) -> f64 {
        let get = |k: &str| f.get(k).cloned().unwrap_or(PyValue::Dict(Vec::new()));
        let stage1 = PyValue::Dict(vec![
            DictEntry::new(PyValue::str("parameters"), get("parameters")),
            DictEntry::new(PyValue::str("decision_variables"), get("decision_variables")),
        ]);
        let parts = [stage1, get("objective"), get("equality_constraints"), get("inequality_constraints")];
        parts.iter().map(|p| self.judge(p).quality).sum::<f64>() / parts.len() as f64
    }
}

fn solutions(prompt: &str) -> Result<Vec<PyValue>, BackendError> {
    let v = last_assignment(prompt, &["solutions".to_string()]).ok_or_else(|| BackendError::Config("prompt has no solutions block".into()))?;
    Ok(v.as_dict().unwrap_or_default().iter().map(|e| e.value.clone()).collect())
}

impl SimulatedExpert {
    pub fn new(file: PoolFile) -> Self {
        SimulatedExpert { problems: file.problems.into_iter().map(Problem::new).collect() }
    }

    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        let file: PoolFile = toml::from_str(&text).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
        Ok(Self::new(file))
    }

    pub fn problem_ids(&self) -> Vec<&str> {
        self.problems.iter().map(|p| p.pool.id.as_str()).collect()
    }

    fn problem_for(&self, prompt: &str) -> Result<&Problem, BackendError> {
        self.problems
            .iter()
            .filter(|p| prompt.contains(p.pool.description.trim()))
            .max_by_key(|p| p.pool.description.len())
            .ok_or_else(|| BackendError::Config("prompt matches no pooled problem description".into()))
    }
}

fn pick<T>(items: &[T], ordinal: usize) -> Result<&T, BackendError> {
    if items.is_empty() {
        return Err(BackendError::Config("empty response pool".into()));
    }
    Ok(&items[ordinal % items.len()])
}

impl GeneratorBackend for SimulatedExpert {
    fn name(&self) -> &str {
        "expert"
    }

    fn complete(&self, req: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let problem = self.problem_for(req.prompt)?;
        let pool = &problem.pool;
        let n = req.ordinal;
        Ok(match req.phase {
            Phase::Parameters => pick(&pool.stage1, n)?.parameters.clone(),
            Phase::Variables => {
                // Answer with a variables response written for the parameters
                // shown in the prompt.
                let shown = assignments(req.prompt, &["formalization_dict".to_string()])
                    .into_iter()
                    .next()
                    .and_then(|(_, v)| v.get("parameters").and_then(parameters_from_py))
                    .map(|p| to_python(&parameters_to_py(&p)));
                let matching: Vec<&Stage1Response> =
                    pool.stage1.iter().zip(&problem.params_keys).filter(|(_, k)| k.is_some() && *k == &shown).map(|(s, _)| s).collect();
                if matching.is_empty() {
                    pick(&pool.stage1, n)?.variables.clone()
                } else {
                    pick(&matching, n)?.variables.clone()
                }
            }
            Phase::Objective => pick(&pool.objective, n)?.response.clone(),
            Phase::Equalities => pick(&pool.equalities, n)?.response.clone(),
            Phase::Inequalities => pick(&pool.inequalities, n)?.response.clone(),
            Phase::Rank => {
                let sols = solutions(req.prompt)?;
                let mut order: Vec<usize> = (0..sols.len()).collect();
                let q: Vec<f64> = sols.iter().map(|s| problem.judge(s).quality).collect();
                order.sort_by(|&a, &b| q[b].total_cmp(&q[a]).then(a.cmp(&b)));
                let lines: Vec<String> = order.iter().enumerate().map(|(r, &i)| format!("{}: 'solution_{}'", r + 1, i + 1)).collect();
                format!("I ranked the options by how faithfully they model the description.\n###\nrank = {{\n{}}}\n###", lines.join(",\n"))
            }
            Phase::Group => {
                let sols = solutions(req.prompt)?;
                let mut classes: Vec<(String, Vec<usize>)> = Vec::new();
                for (i, s) in sols.iter().enumerate() {
                    let c = problem.judge(s).class;
                    match classes.iter_mut().find(|(k, _)| *k == c) {
                        Some((_, members)) => members.push(i),
                        None => classes.push((c, vec![i])),
                    }
                }
                let lines: Vec<String> = classes
                    .iter()
                    .enumerate()
                    .map(|(g, (_, m))| format!("{}: [{}]", g + 1, m.iter().map(|i| format!("'solution_{}'", i + 1)).collect::<Vec<_>>().join(", ")))
                    .collect();
                format!("Grouping variable sets that lead to the same model.\n###\ngroups = {{\n{}}}\n###", lines.join(",\n"))
            }
            Phase::Compare => {
                let candidate = assignments(req.prompt, &["formalization_dict".to_string()]).into_iter().next().map(|(_, v)| v);
                let baseline = last_assignment(req.prompt, &["baseline".to_string()]);
                let (Some(c), Some(b)) = (candidate, baseline) else {
                    return Err(BackendError::Config("compare prompt lacks a formulation".into()));
                };
                let score = (0.5 + 0.5 * (problem.formulation_quality(&c) - problem.formulation_quality(&b))).clamp(0.0, 1.0);
                format!("Weighing both formulations against the description.\nscore = {:.3}", score)
            }
        })
    }
}
