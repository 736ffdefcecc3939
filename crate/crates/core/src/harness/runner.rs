use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use anyhow::Context;
use serde::{Deserialize, Serialize};

use super::metrics::{best_of_n, correctness, pass_at_n, tree_entropy};
use crate::gateway::{BackendConfig, CallRecord, Gateway, GatewayConfig, GeneratorBackend};
use crate::model::{Difficulty, ProblemDescription, ProblemType};
use crate::search::{run_search, SearchConfig, SearchOutcome, SearchTree};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub search: SearchConfig,
    pub gateway: GatewayConfig,
    pub backend: BackendConfig,
    /// Problems solved in parallel.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { search: SearchConfig::default(), gateway: GatewayConfig::default(), backend: BackendConfig::default(), workers: 1 }
    }
}

impl RunConfig {
    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> anyhow::Result<RunConfig> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: RunConfig = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        };
        cfg.search.validate()?;
        Ok(cfg)
    }
}

/// Everything persisted for one problem, minus timings and the call log,
/// which live in sibling files so that this record is byte-stable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem_id: String,
    pub ground_truth_objective: Option<f64>,
    pub difficulty: Option<Difficulty>,
    pub problem_type: Option<ProblemType>,
    pub config: RunConfig,
    pub backend: String,
    pub search: Option<SearchOutcome>,
    pub error: Option<String>,
    pub call_log: String,
    pub timings: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub problem_id: String,
    pub wall_seconds: f64,
    pub solve_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct ProblemRun {
    pub record: RunRecord,
    pub calls: Vec<CallRecord>,
    pub timings: Timings,
}

/// File stem for a problem id: anything outside `[A-Za-z0-9_.-]` becomes `_`.
pub fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || "_.-".contains(c) { c } else { '_' }).collect()
}

pub fn run_problem(problem: &ProblemDescription, config: &RunConfig, backend: Arc<dyn GeneratorBackend>) -> ProblemRun {
    let started = Instant::now();
    let gateway = Gateway::new(backend, config.gateway);
    let result = run_search(&problem.text, &gateway, &config.search);
    let stem = file_stem(&problem.id);
    let (search, error) = match result {
        Ok(s) => (Some(s), None),
        Err(e) => {
            log::error!("{}: {e}", problem.id);
            (None, Some(e.to_string()))
        }
    };
    let solve_seconds = search.iter().flat_map(|s| &s.records).filter_map(|r| r.solve.as_ref()).map(|s| s.solve_time).sum();
    let record = RunRecord {
        problem_id: problem.id.clone(),
        ground_truth_objective: problem.ground_truth_objective,
        difficulty: problem.difficulty,
        problem_type: problem.problem_type,
        config: config.clone(),
        backend: gateway.backend_name().to_string(),
        search,
        error,
        call_log: format!("{stem}.calls.jsonl"),
        timings: format!("{stem}.timings.json"),
    };
    let timings = Timings { problem_id: problem.id.clone(), wall_seconds: started.elapsed().as_secs_f64(), solve_seconds };
    ProblemRun { record, calls: gateway.call_log(), timings }
}

/// Runs every problem on `config.workers` threads; results keep dataset
/// order.
pub fn run_dataset(problems: &[ProblemDescription], config: &RunConfig, backend: Arc<dyn GeneratorBackend>) -> Vec<ProblemRun> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<ProblemRun>>> = Mutex::new(vec![None; problems.len()]);
    std::thread::scope(|s| {
        for _ in 0..config.workers.max(1).min(problems.len().max(1)) {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                let Some(p) = problems.get(k) else { break };
                let run = run_problem(p, config, backend.clone());
                slots.lock().expect("result lock")[k] = Some(run);
            });
        }
    });
    slots.into_inner().expect("result lock").into_iter().map(|r| r.expect("every problem ran")).collect()
}

pub fn write_problem_run(dir: &Path, run: &ProblemRun) -> anyhow::Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let stem = file_stem(&run.record.problem_id);
    let path = dir.join(format!("{stem}.run.json"));
    std::fs::write(&path, serde_json::to_vec_pretty(&run.record)?)?;
    let mut calls = Vec::new();
    for c in &run.calls {
        serde_json::to_writer(&mut calls, c)?;
        calls.push(b'\n');
    }
    std::fs::write(dir.join(&run.record.call_log), calls)?;
    std::fs::write(dir.join(&run.record.timings), serde_json::to_vec_pretty(&run.timings)?)?;
    Ok(path)
}

pub fn read_run(path: &Path) -> anyhow::Result<RunRecord> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))
}

/// All `*.run.json` files in a directory, sorted by file name.
pub fn read_runs(dir: &Path) -> anyhow::Result<Vec<RunRecord>> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.file_name().is_some_and(|n| n.to_string_lossy().ends_with(".run.json")))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_run(p)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    PassAt(usize),
    BestOf(usize),
    /// Correctness of the best record over the whole run.
    Accuracy,
    Entropy,
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let count = |n: &str| n.parse::<usize>().ok().filter(|&n| n >= 1).ok_or_else(|| format!("bad N in `{s}`"));
        let lower = s.to_ascii_lowercase();
        if let Some(n) = lower.strip_prefix("pass@") {
            return Ok(Metric::PassAt(count(n)?));
        }
        if let Some(n) = lower.strip_prefix("best-of-") {
            return Ok(Metric::BestOf(count(n)?));
        }
        match lower.as_str() {
            "accuracy" => Ok(Metric::Accuracy),
            "entropy" => Ok(Metric::Entropy),
            _ => Err(format!("unknown metric `{s}`; expected pass@N, best-of-N, accuracy or entropy")),
        }
    }
}

impl std::fmt::Display for Metric {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Metric::PassAt(n) => write!(f, "pass@{n}"),
            Metric::BestOf(n) => write!(f, "best-of-{n}"),
            Metric::Accuracy => f.write_str("accuracy"),
            Metric::Entropy => f.write_str("entropy"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow {
    pub problem_id: String,
    pub difficulty: Option<Difficulty>,
    pub problem_type: Option<ProblemType>,
    /// `None` when the metric is undefined (no ground truth).
    pub value: Option<f64>,
}

fn boolean(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

pub fn score_run(run: &RunRecord, metric: Metric) -> Option<f64> {
    let lambda = run.config.search.lambda;
    let empty = SearchTree::new();
    let (records, tree) = match &run.search {
        Some(s) => (&s.records[..], &s.tree),
        None => (&[][..], &empty),
    };
    if metric == Metric::Entropy {
        return run.search.as_ref().map(|s| tree_entropy(&s.tree));
    }
    let gt = run.ground_truth_objective?;
    let correct = correctness(records, gt);
    Some(boolean(match metric {
        Metric::PassAt(n) => pass_at_n(&correct, n),
        Metric::BestOf(n) => best_of_n(records, tree, n, lambda).is_some_and(|k| correct[k]),
        Metric::Accuracy => best_of_n(records, tree, records.len(), lambda).is_some_and(|k| correct[k]),
        Metric::Entropy => unreachable!(),
    }))
}

pub fn score_runs(runs: &[RunRecord], metric: Metric) -> Vec<ScoreRow> {
    runs.iter()
        .map(|r| ScoreRow { problem_id: r.problem_id.clone(), difficulty: r.difficulty, problem_type: r.problem_type, value: score_run(r, metric) })
        .collect()
}

/// Unweighted mean of the defined values, with their count.
pub fn aggregate<'a>(rows: impl IntoIterator<Item = &'a ScoreRow>) -> Option<(f64, usize)> {
    let vals: Vec<f64> = rows.into_iter().filter_map(|r| r.value).collect();
    (!vals.is_empty()).then(|| (vals.iter().sum::<f64>() / vals.len() as f64, vals.len()))
}

/// Per-problem rows, the aggregate, and breakdowns by difficulty and type
/// when labels exist. `tsv` switches to tab-separated output.
pub fn render_table(rows: &[ScoreRow], metric: Metric, tsv: bool) -> String {
    let mut lines: Vec<[String; 4]> = vec![["group".into(), "problem".into(), metric.to_string(), "n".into()]];
    let fmt = |v: Option<f64>| match (metric, v) {
        (_, None) => "n/a".to_string(),
        (Metric::Entropy, Some(v)) => format!("{v:.4}"),
        (_, Some(v)) => if v == 1.0 { "true" } else { "false" }.to_string(),
    };
    for r in rows {
        lines.push(["problem".into(), r.problem_id.clone(), fmt(r.value), usize::from(r.value.is_some()).to_string()]);
    }
    let agg = |label: String, rs: Vec<&ScoreRow>| -> [String; 4] {
        let (value, n) = match aggregate(rs) {
            Some((m, n)) => (format!("{m:.4}"), n),
            None => ("n/a".into(), 0),
        };
        ["aggregate".into(), label, value, n.to_string()]
    };
    lines.push(agg("all".into(), rows.iter().collect()));
    let mut by_difficulty: BTreeMap<Difficulty, Vec<&ScoreRow>> = BTreeMap::new();
    let mut by_type: BTreeMap<ProblemType, Vec<&ScoreRow>> = BTreeMap::new();
    for r in rows {
        if let Some(d) = r.difficulty {
            by_difficulty.entry(d).or_default().push(r);
        }
        if let Some(t) = r.problem_type {
            by_type.entry(t).or_default().push(r);
        }
    }
    for (d, rs) in by_difficulty {
        lines.push(agg(format!("difficulty={d}"), rs));
    }
    for (t, rs) in by_type {
        lines.push(agg(format!("type={t}"), rs));
    }
    let mut out = String::new();
    if tsv {
        for l in &lines {
            let _ = writeln!(out, "{}", l.join("\t"));
        }
    } else {
        let w0 = lines.iter().map(|l| l[0].len()).max().unwrap_or(0);
        let w1 = lines.iter().map(|l| l[1].len()).max().unwrap_or(0);
        let w2 = lines.iter().map(|l| l[2].len()).max().unwrap_or(0);
        for l in &lines {
            let _ = writeln!(out, "{:w0$}  {:w1$}  {:w2$}  {}", l[0], l[1], l[2], l[3]);
        }
    }
    out
}

/// Indented text view of a tree snapshot.
pub fn render_tree(tree: &SearchTree, lambda: f64) -> String {
    fn summary(c: &crate::model::Component) -> String {
        use crate::model::Component;
        match c {
            Component::Variables { parameters, variables } => {
                format!("{} parameters; variables {}", parameters.len(), variables.iter().map(|v| v.name.as_str()).collect::<Vec<_>>().join(", "))
            }
            Component::Objective(o) => format!("{} {}", o.sense.key(), o.expression),
            Component::Equalities(s) | Component::Inequalities(s) => {
                if s.is_empty() {
                    "{None: None}".into()
                } else {
                    s.entries.keys().cloned().collect::<Vec<_>>().join(", ")
                }
            }
        }
    }
    fn walk(tree: &SearchTree, id: usize, lambda: f64, out: &mut String) {
        let n = tree.node(id);
        let label = n.payload.as_ref().map_or_else(|| "root".to_string(), summary);
        let term = n.terminal.map(|t| format!(" -> record {t}")).unwrap_or_default();
        let _ = writeln!(
            out,
            "{}[{}] d={} N={} V={:.4} prior={:.4} bp={:.4} {}{}",
            "  ".repeat(n.depth as usize),
            n.id,
            n.depth,
            n.visits,
            n.value(lambda),
            n.v_prior,
            n.v_bp,
            label,
            term
        );
        for &c in &n.children {
            walk(tree, c, lambda, out);
        }
    }
    let mut out = String::new();
    walk(tree, crate::search::ROOT, lambda, &mut out);
    out
}

/// The backend a config names; relative paths resolve against `base`.
pub fn build_backend(config: &BackendConfig, base: &Path) -> anyhow::Result<Arc<dyn GeneratorBackend>> {
    config.build(base)
}
