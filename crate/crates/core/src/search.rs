//! Monte-Carlo tree search over formulation components. Depth 1 holds
//! parameters with decision variables, then objective, equalities and
//! inequalities; a depth-4 node is a complete formulation.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::equiv::{check_formulations, prune_candidates};
use crate::gateway::{BackendError, Gateway};
use crate::model::{Component, Formulation, PartialFormulation};
use crate::solver::{lower, solver_indicator, ComputationalModel, SolveLimits, SolveResult, SolverKind};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    /// Samples per expansion.
    pub h: usize,
    /// Children retained per expansion.
    pub i: usize,
    /// Rollouts.
    pub t: usize,
    pub omega: f64,
    pub lambda: f64,
    pub seed: u64,
    pub solver: SolverKind,
    pub limits: SolveLimits,
}

impl Default for SearchConfig {
    fn default() -> Self {
        SearchConfig { h: 10, i: 3, t: 16, omega: 1.0, lambda: 0.5, seed: 0, solver: SolverKind::Builtin, limits: SolveLimits::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("invalid search config: {0}")]
    Config(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
}

impl SearchConfig {
    pub fn validate(&self) -> Result<(), SearchError> {
        let bad = |m: &str| Err(SearchError::Config(m.to_string()));
        if self.i < 1 || self.h < self.i {
            return bad("need H >= I >= 1");
        }
        if self.t < 1 {
            return bad("need T >= 1");
        }
        if self.omega.is_nan() || self.omega < 0.0 {
            return bad("need omega >= 0");
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return bad("need lambda in [0, 1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchNode {
    pub id: usize,
    pub parent: Option<usize>,
    pub depth: u8,
    pub payload: Option<Component>,
    pub v_prior: f64,
    pub v_bp: f64,
    pub visits: u64,
    pub children: Vec<usize>,
    pub expanded: bool,
    /// Ordinal of the terminal record this node evaluates to.
    pub terminal: Option<usize>,
}

impl SearchNode {
    /// `V = λ·V_prior + (1−λ)·V_bp`.
    pub fn value(&self, lambda: f64) -> f64 {
        lambda * self.v_prior + (1.0 - lambda) * self.v_bp
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchTree {
    pub nodes: Vec<SearchNode>,
}

pub const ROOT: usize = 0;

impl SearchTree {
    pub fn new() -> Self {
        let root = SearchNode { id: ROOT, parent: None, depth: 0, payload: None, v_prior: 0.0, v_bp: 0.0, visits: 0, children: Vec::new(), expanded: false, terminal: None };
        SearchTree { nodes: vec![root] }
    }

    pub fn node(&self, id: usize) -> &SearchNode {
        &self.nodes[id]
    }

    /// Node ids from the root to `id`.
    pub fn path(&self, id: usize) -> Vec<usize> {
        let mut path = vec![id];
        let mut n = id;
        while let Some(p) = self.nodes[n].parent {
            path.push(p);
            n = p;
        }
        path.reverse();
        path
    }

    pub fn partial(&self, id: usize) -> PartialFormulation {
        let mut p = PartialFormulation::root();
        for n in self.path(id).into_iter().skip(1) {
            p.push(self.nodes[n].payload.clone().expect("non-root nodes carry a payload")).expect("tree depth matches component depth");
        }
        p
    }

    fn add_child(&mut self, parent: usize, payload: Component, v_prior: f64) -> usize {
        let id = self.nodes.len();
        let depth = self.nodes[parent].depth + 1;
        self.nodes.push(SearchNode { id, parent: Some(parent), depth, payload: Some(payload), v_prior, v_bp: 0.0, visits: 0, children: Vec::new(), expanded: false, terminal: None });
        self.nodes[parent].children.push(id);
        id
    }
}

impl Default for SearchTree {
    fn default() -> Self {
        Self::new()
    }
}

/// The statistics UCT looks at for one child.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChildStats {
    pub v_prior: f64,
    pub v_bp: f64,
    pub visits: u64,
}

/// Index of the child maximizing `V + ω·sqrt(ln N(parent) / N(child))`.
/// Unvisited children come first, highest prior wins among them; every tie
/// goes to the earlier child.
pub fn uct_choice(parent_visits: u64, children: &[ChildStats], omega: f64, lambda: f64) -> usize {
    assert!(!children.is_empty(), "UCT needs a child");
    let mut best: Option<(usize, f64)> = None;
    for (k, c) in children.iter().enumerate().filter(|(_, c)| c.visits == 0) {
        if best.is_none_or(|(_, p)| c.v_prior > p) {
            best = Some((k, c.v_prior));
        }
    }
    if let Some((k, _)) = best {
        return k;
    }
    let ln_n = (parent_visits.max(1) as f64).ln();
    for (k, c) in children.iter().enumerate() {
        let v = lambda * c.v_prior + (1.0 - lambda) * c.v_bp;
        let score = v + omega * (ln_n / c.visits as f64).sqrt();
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((k, score));
        }
    }
    best.expect("non-empty").0
}

pub fn uct_select(tree: &SearchTree, n: usize, config: &SearchConfig) -> usize {
    let node = tree.node(n);
    let stats: Vec<ChildStats> = node
        .children
        .iter()
        .map(|&c| {
            let c = tree.node(c);
            ChildStats { v_prior: c.v_prior, v_bp: c.v_bp, visits: c.visits }
        })
        .collect();
    node.children[uct_choice(node.visits, &stats, config.omega, config.lambda)]
}

/// Child with the highest prior, earliest on ties.
fn greedy_child(tree: &SearchTree, n: usize) -> usize {
    let children = &tree.node(n).children;
    let mut best = children[0];
    for &c in &children[1..] {
        if tree.node(c).v_prior > tree.node(best).v_prior {
            best = c;
        }
    }
    best
}

/// `V_bp ← (V_bp·N + r)/(N + 1)`, `N ← N + 1` along the path.
pub fn backpropagate(tree: &mut SearchTree, path: &[usize], r: f64) {
    for &id in path {
        let n = &mut tree.nodes[id];
        n.v_bp = (n.v_bp * n.visits as f64 + r) / (n.visits + 1) as f64;
        n.visits += 1;
    }
}

/// What one expansion did, for diagnostics and pruning statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionRecord {
    pub node: usize,
    pub stage: u8,
    pub generated: usize,
    /// Equivalence classes among the generated candidates.
    pub classes: usize,
    pub rank_fallback: bool,
    pub children: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExpandError {
    #[error("no parsable candidate survived expansion")]
    ExpansionEmpty,
    #[error(transparent)]
    Backend(#[from] BackendError),
}

/// Generate, prune, rank and keep the top `I`. Children are created in
/// generation order with `V_prior` set to their normalized rank score.
pub fn expand(tree: &mut SearchTree, n: usize, description: &str, gateway: &Gateway, config: &SearchConfig) -> Result<ExpansionRecord, ExpandError> {
    let depth = tree.node(n).depth;
    assert!(depth < 4, "terminal nodes are not expanded");
    let stage = depth + 1;
    let partial = tree.partial(n);
    tree.nodes[n].expanded = true;

    let cands = gateway.generate_candidates(stage, description, &partial, config.h)?;
    if cands.is_empty() {
        return Err(ExpandError::ExpansionEmpty);
    }
    let representatives: Vec<usize> = if stage == 1 {
        gateway.group_variable_sets(description, &cands)?.into_iter().map(|g| g[0]).collect()
    } else {
        prune_candidates(&cands, stage, &partial).retained
    };
    let pruned: Vec<Component> = representatives.iter().map(|&k| cands[k].clone()).collect();
    let rank = gateway.rank_candidates(stage, description, &partial, &pruned)?;
    let keep = config.i.min(pruned.len());
    let mut kept: Vec<usize> = rank.order[..keep].to_vec();
    kept.sort_unstable();
    let children = kept.into_iter().map(|k| tree.add_child(n, pruned[k].clone(), rank.scores[k])).collect();
    Ok(ExpansionRecord { node: n, stage, generated: cands.len(), classes: pruned.len(), rank_fallback: rank.fallback, children })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TerminalRecord {
    /// Discovery order, starting at 0.
    pub ordinal: usize,
    pub node: usize,
    pub formulation: Formulation,
    pub model: Option<ComputationalModel>,
    pub solve: Option<SolveResult>,
    pub lowering_error: Option<String>,
    pub reward: f64,
}

impl TerminalRecord {
    pub fn objective_value(&self) -> Option<f64> {
        self.solve.as_ref().and_then(|s| s.objective_value)
    }

    pub fn indicator(&self) -> u8 {
        self.solve.as_ref().map_or(0, solver_indicator)
    }
}

/// Lowers and solves; the result is `(model, solve, lowering error)`.
pub fn evaluate_formulation(f: &Formulation, config: &SearchConfig) -> (Option<ComputationalModel>, Option<SolveResult>, Option<String>) {
    match lower(f) {
        Ok(model) => {
            let solve = config.solver.backend().solve(&model, &config.limits);
            (Some(model), Some(solve), None)
        }
        Err(e) => (None, None, Some(e.to_string())),
    }
}

/// Reward of a terminal: zero unless the solver reports an optimum, else the
/// comparison score against the baseline (0.5 for the baseline itself).
pub fn terminal_reward(
    solve: Option<&SolveResult>,
    formulation: &Formulation,
    baseline: &Formulation,
    description: &str,
    gateway: &Gateway,
) -> Result<f64, BackendError> {
    if solve.is_none_or(|s| solver_indicator(s) == 0) {
        return Ok(0.0);
    }
    gateway.compare_to_baseline(description, formulation, baseline)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RolloutOutcome {
    Terminal { record: usize, new: bool },
    Aborted { node: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutRecord {
    pub index: usize,
    pub path: Vec<usize>,
    pub outcome: RolloutOutcome,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchOutcome {
    pub tree: SearchTree,
    pub records: Vec<TerminalRecord>,
    pub rollouts: Vec<RolloutRecord>,
    pub expansions: Vec<ExpansionRecord>,
    /// Ordinal of the record used as comparison baseline.
    pub baseline: Option<usize>,
}

struct Search<'a> {
    description: &'a str,
    gateway: &'a Gateway,
    config: &'a SearchConfig,
    out: SearchOutcome,
}

impl Search<'_> {
    /// Expands `n`, logging it. `Ok(false)` means nothing survived.
    fn try_expand(&mut self, n: usize) -> Result<bool, SearchError> {
        match expand(&mut self.out.tree, n, self.description, self.gateway, self.config) {
            Ok(rec) => {
                self.out.expansions.push(rec);
                Ok(true)
            }
            Err(ExpandError::ExpansionEmpty) => {
                let stage = self.out.tree.node(n).depth + 1;
                self.out.expansions.push(ExpansionRecord { node: n, stage, generated: 0, classes: 0, rank_fallback: false, children: Vec::new() });
                Ok(false)
            }
            Err(ExpandError::Backend(e)) => Err(e.into()),
        }
    }

    /// Reward of a terminal node, evaluating it on first contact. A node
    /// equivalent on all three components to a known record shares it.
    fn evaluate_terminal(&mut self, n: usize) -> Result<(usize, bool), SearchError> {
        if let Some(k) = self.out.tree.node(n).terminal {
            return Ok((k, false));
        }
        let f = self.out.tree.partial(n).to_formulation().expect("depth-4 node is complete");
        let known = self.out.records.iter().find(|r| check_formulations(&r.formulation, &f).is_ok_and(|v| v.all_equivalent())).map(|r| r.ordinal);
        if let Some(k) = known {
            self.out.tree.nodes[n].terminal = Some(k);
            return Ok((k, false));
        }
        let (model, solve, lowering_error) = evaluate_formulation(&f, self.config);
        let baseline = match self.out.baseline {
            Some(b) => self.out.records[b].formulation.clone(),
            None => f.clone(),
        };
        let reward = terminal_reward(solve.as_ref(), &f, &baseline, self.description, self.gateway)?;
        let ordinal = self.out.records.len();
        self.out.baseline.get_or_insert(ordinal);
        self.out.records.push(TerminalRecord { ordinal, node: n, formulation: f, model, solve, lowering_error, reward });
        self.out.tree.nodes[n].terminal = Some(ordinal);
        Ok((ordinal, true))
    }

    fn rollout(&mut self, index: usize) -> Result<(), SearchError> {
        let mut path = vec![ROOT];
        let mut n = ROOT;
        let mut aborted = None;
        // Selection through expanded nodes.
        while self.out.tree.node(n).depth < 4 && self.out.tree.node(n).expanded {
            if self.out.tree.node(n).children.is_empty() {
                aborted = Some("dead end: an earlier expansion produced no candidates".to_string());
                break;
            }
            n = uct_select(&self.out.tree, n, self.config);
            path.push(n);
        }
        // Expansion, then greedy descent by prior to a terminal.
        while aborted.is_none() && self.out.tree.node(n).depth < 4 {
            if !self.try_expand(n)? {
                aborted = Some("expansion produced no candidates".to_string());
                break;
            }
            n = greedy_child(&self.out.tree, n);
            path.push(n);
        }
        let (outcome, reward) = match aborted {
            Some(reason) => (RolloutOutcome::Aborted { node: n, reason }, 0.0),
            None => {
                let (record, new) = self.evaluate_terminal(n)?;
                (RolloutOutcome::Terminal { record, new }, self.out.records[record].reward)
            }
        };
        backpropagate(&mut self.out.tree, &path, reward);
        self.out.rollouts.push(RolloutRecord { index, path, outcome, reward });
        Ok(())
    }
}

/// Runs `T` rollouts and returns the tree with the distinct terminal
/// formulations in discovery order.
pub fn run_search(description: &str, gateway: &Gateway, config: &SearchConfig) -> Result<SearchOutcome, SearchError> {
    config.validate()?;
    let mut s = Search {
        description,
        gateway,
        config,
        out: SearchOutcome { tree: SearchTree::new(), records: Vec::new(), rollouts: Vec::new(), expansions: Vec::new(), baseline: None },
    };
    for index in 0..config.t {
        s.rollout(index)?;
    }
    Ok(s.out)
}
