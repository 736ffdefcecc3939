//! Everything that talks to the language model: prompt rendering, candidate
//! sampling, ranking, stage-1 grouping and baseline comparison. Backends sit
//! behind [`GeneratorBackend`]; the scripted one replays fixtures.

mod backend;
mod expert;
mod payload;
mod prompt;
mod pyliteral;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::model::{Component, Formulation, PartialFormulation};

pub use backend::{
    read_fixtures, write_fixtures, BackendConfig, BackendError, BackendKind, CompletionRequest, FixtureEntry, GeneratorBackend, HttpBackend,
    RecordingBackend, ScriptedBackend,
};
pub use expert::{PoolFile, PoolResponse, ProblemPool, SimulatedExpert, Stage1Response};
pub use payload::{
    component_to_py, extract_field, formalization_to_py, parse_generation, parse_groups, parse_rank, parse_score, Parsed,
};
pub use prompt::{compare_prompt, generation_prompt, group_prompt, prompt_sha256, rank_prompt, render_formalization, stage_noun, template, StagePrompt};
pub use pyliteral::{assignments, last_assignment, parse_literal, to_python, to_python_pretty, DictEntry, LiteralError, PyValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Parameters,
    Variables,
    Objective,
    Equalities,
    Inequalities,
    Rank,
    Group,
    Compare,
}

impl Phase {
    pub fn is_generation(self) -> bool {
        !matches!(self, Phase::Rank | Phase::Group | Phase::Compare)
    }

    /// The `formalization_dict` field a generation phase fills.
    pub fn field(self) -> Option<&'static str> {
        Some(match self {
            Phase::Parameters => "parameters",
            Phase::Variables => "decision_variables",
            Phase::Objective => "objective",
            Phase::Equalities => "equality_constraints",
            Phase::Inequalities => "inequality_constraints",
            _ => return None,
        })
    }

    /// The generation phase producing level `stage` (2..=4).
    pub fn for_stage(stage: u8) -> Phase {
        match stage {
            2 => Phase::Objective,
            3 => Phase::Equalities,
            4 => Phase::Inequalities,
            _ => Phase::Variables,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    pub generation_temperature: f64,
    pub structured_temperature: f64,
    /// Extra attempts for an unparsable rank, group or score answer.
    pub structured_retries: usize,
    /// Completions issued concurrently within one batch.
    pub max_in_flight: usize,
    pub seed: Option<u64>,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig { generation_temperature: 1.0, structured_temperature: 0.0, structured_retries: 1, max_in_flight: 1, seed: None }
    }
}

/// One completion as issued, in issue order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CallRecord {
    pub index: usize,
    pub phase: Phase,
    pub prompt_sha256: String,
    pub ordinal: usize,
    pub temperature: f64,
    pub response: Option<String>,
    pub error: Option<String>,
}

#[derive(Default)]
struct CallState {
    ordinals: HashMap<String, usize>,
    log: Vec<CallRecord>,
}

pub struct Gateway {
    backend: Arc<dyn GeneratorBackend>,
    config: GatewayConfig,
    state: Mutex<CallState>,
}

/// `s = 1 − (r − 0.5)/K` for rank `r` of `K`: centred on 0.5, evenly
/// spaced by `1/K`.
pub fn normalized_rank_score(r: usize, k: usize) -> f64 {
    assert!(r >= 1 && r <= k, "rank {r} outside 1..={k}");
    1.0 - (r as f64 - 0.5) / k as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankResult {
    /// Candidate indices, best first.
    pub order: Vec<usize>,
    /// Normalized score of each candidate, by candidate index.
    pub scores: Vec<f64>,
    /// Whether generation order was used because no valid ranking came back.
    pub fallback: bool,
}

impl RankResult {
    pub fn from_order(order: Vec<usize>, fallback: bool) -> Self {
        let k = order.len();
        let mut scores = vec![0.0; k];
        for (r, &c) in order.iter().enumerate() {
            scores[c] = normalized_rank_score(r + 1, k);
        }
        RankResult { order, scores, fallback }
    }
}

impl Gateway {
    pub fn new(backend: Arc<dyn GeneratorBackend>, config: GatewayConfig) -> Self {
        Gateway { backend, config, state: Mutex::new(CallState::default()) }
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.config
    }

    pub fn backend_name(&self) -> &str {
        self.backend.name()
    }

    pub fn call_log(&self) -> Vec<CallRecord> {
        self.state.lock().expect("gateway lock").log.clone()
    }

    pub fn calls_in_phase(&self, phase: Phase) -> usize {
        self.state.lock().expect("gateway lock").log.iter().filter(|c| c.phase == phase).count()
    }

    /// Issues a batch. Ordinals and log slots are assigned in batch order
    /// before anything is sent, so concurrency never changes the log.
    pub fn complete_batch(&self, prompts: &[StagePrompt], temperature: f64) -> Vec<Result<String, BackendError>> {
        let issued: Vec<(usize, String, usize)> = {
            let mut st = self.state.lock().expect("gateway lock");
            prompts
                .iter()
                .map(|p| {
                    let sha = p.sha256();
                    let counter = st.ordinals.entry(sha.clone()).or_insert(0);
                    let ordinal = *counter;
                    *counter += 1;
                    let index = st.log.len();
                    st.log.push(CallRecord { index, phase: p.phase, prompt_sha256: sha.clone(), ordinal, temperature, response: None, error: None });
                    (index, sha, ordinal)
                })
                .collect()
        };
        let run = |(p, (_, sha, ordinal)): (&StagePrompt, &(usize, String, usize))| {
            self.backend.complete(&CompletionRequest {
                prompt: &p.text,
                prompt_sha256: sha,
                phase: p.phase,
                temperature,
                ordinal: *ordinal,
                seed: self.config.seed,
            })
        };
        let width = self.config.max_in_flight.max(1);
        let mut results = Vec::with_capacity(prompts.len());
        let jobs: Vec<_> = prompts.iter().zip(&issued).collect();
        for chunk in jobs.chunks(width) {
            if chunk.len() == 1 {
                results.push(run(chunk[0]));
            } else {
                std::thread::scope(|s| {
                    let handles: Vec<_> = chunk.iter().map(|&job| s.spawn(move || run(job))).collect();
                    results.extend(handles.into_iter().map(|h| h.join().expect("completion thread panicked")));
                });
            }
        }
        let mut st = self.state.lock().expect("gateway lock");
        for ((index, _, _), r) in issued.iter().zip(&results) {
            let rec = &mut st.log[*index];
            match r {
                Ok(text) => rec.response = Some(text.clone()),
                Err(e) => rec.error = Some(e.to_string()),
            }
        }
        results
    }

    fn complete_one(&self, prompt: &StagePrompt, temperature: f64) -> Result<String, BackendError> {
        self.complete_batch(std::slice::from_ref(prompt), temperature).pop().expect("one result")
    }

    fn generate_batch(&self, prompts: Vec<StagePrompt>) -> Result<Vec<Option<Parsed>>, BackendError> {
        let results = self.complete_batch(&prompts, self.config.generation_temperature);
        let mut out = Vec::with_capacity(results.len());
        for (p, r) in prompts.iter().zip(results) {
            let parsed = parse_generation(p.phase, &r?);
            if parsed.is_none() {
                log::info!("dropping unparsable {:?} response", p.phase);
            }
            out.push(parsed);
        }
        Ok(out)
    }

    /// Samples `h` candidates for level `stage`. Level 1 is two batches:
    /// `h` parameter tables, then one variables completion per table.
    /// Unparsable responses are dropped, so fewer than `h` may come back.
    pub fn generate_candidates(&self, stage: u8, description: &str, partial: &PartialFormulation, h: usize) -> Result<Vec<Component>, BackendError> {
        assert!(h >= 1, "H must be at least 1");
        if stage == 1 {
            let prompt = generation_prompt(Phase::Parameters, description, partial);
            let tables: Vec<_> = self
                .generate_batch(vec![prompt; h])?
                .into_iter()
                .filter_map(|p| match p {
                    Some(Parsed::Parameters(t)) => Some(t),
                    _ => None,
                })
                .collect();
            let prompts = tables
                .iter()
                .map(|t| {
                    let mut ctx = PartialFormulation::root();
                    ctx.parameters = t.clone();
                    generation_prompt(Phase::Variables, description, &ctx)
                })
                .collect();
            let vars = self.generate_batch(prompts)?;
            return Ok(tables
                .into_iter()
                .zip(vars)
                .filter_map(|(parameters, v)| match v {
                    Some(Parsed::Component(Component::Variables { variables, .. })) => Some(Component::Variables { parameters, variables }),
                    _ => None,
                })
                .collect());
        }
        let prompt = generation_prompt(Phase::for_stage(stage), description, partial);
        Ok(self
            .generate_batch(vec![prompt; h])?
            .into_iter()
            .filter_map(|p| match p {
                Some(Parsed::Component(c)) if c.depth() == stage => Some(c),
                _ => None,
            })
            .collect())
    }

    /// Asks, retries on an unparsable answer, and reports `None` once the
    /// retry budget is spent.
    fn structured<T>(&self, prompt: &StagePrompt, parse: impl Fn(&str) -> Option<T>) -> Result<Option<T>, BackendError> {
        for attempt in 0..=self.config.structured_retries {
            let text = self.complete_one(prompt, self.config.structured_temperature)?;
            if let Some(v) = parse(&text) {
                return Ok(Some(v));
            }
            log::info!("unparsable {:?} answer (attempt {})", prompt.phase, attempt + 1);
        }
        Ok(None)
    }

    /// Ranks candidates of level `stage`. A single candidate is not sent.
    pub fn rank_candidates(&self, stage: u8, description: &str, partial: &PartialFormulation, candidates: &[Component]) -> Result<RankResult, BackendError> {
        assert!(!candidates.is_empty(), "ranking needs a candidate");
        let k = candidates.len();
        if k == 1 {
            return Ok(RankResult::from_order(vec![0], false));
        }
        let prompt = rank_prompt(stage, description, partial, candidates);
        Ok(match self.structured(&prompt, |t| parse_rank(t, k))? {
            Some(order) => RankResult::from_order(order, false),
            None => {
                log::warn!("no valid ranking; falling back to generation order");
                RankResult::from_order((0..k).collect(), true)
            }
        })
    }

    /// Groups level-1 candidates into equivalence classes, each sorted with
    /// its representative (earliest index) first.
    pub fn group_variable_sets(&self, description: &str, candidates: &[Component]) -> Result<Vec<Vec<usize>>, BackendError> {
        assert!(!candidates.is_empty(), "grouping needs a candidate");
        let k = candidates.len();
        if k == 1 {
            return Ok(vec![vec![0]]);
        }
        let prompt = group_prompt(description, candidates);
        Ok(self.structured(&prompt, |t| parse_groups(t, k))?.unwrap_or_else(|| {
            log::warn!("no valid grouping; keeping every variable set");
            (0..k).map(|i| vec![i]).collect()
        }))
    }

    /// Comparative score of `candidate` against the baseline; above 0.5
    /// prefers the candidate. A formulation equal to the baseline scores
    /// 0.5 without a call.
    pub fn compare_to_baseline(&self, description: &str, candidate: &Formulation, baseline: &Formulation) -> Result<f64, BackendError> {
        if candidate == baseline {
            return Ok(0.5);
        }
        let prompt = compare_prompt(description, candidate, baseline);
        Ok(self.structured(&prompt, parse_score)?.unwrap_or_else(|| {
            log::warn!("no parsable score; using 0.5");
            0.5
        }))
    }
}
