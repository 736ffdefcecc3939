use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::expert::SimulatedExpert;
use super::Phase;

#[derive(Debug, Clone)]
pub struct CompletionRequest<'a> {
    pub prompt: &'a str,
    pub prompt_sha256: &'a str,
    pub phase: Phase,
    pub temperature: f64,
    /// How many earlier calls in this run carried the same prompt.
    pub ordinal: usize,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BackendError {
    #[error("no fixture response for prompt {prompt_sha256} (ordinal {ordinal})")]
    MissingFixture { prompt_sha256: String, ordinal: usize },
    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: usize, message: String },
    #[error("{0}")]
    Config(String),
}

pub trait GeneratorBackend: Send + Sync {
    fn name(&self) -> &str;
    fn complete(&self, req: &CompletionRequest<'_>) -> Result<String, BackendError>;
}

/// One line of a fixture file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixtureEntry {
    pub prompt_sha256: String,
    pub ordinal: usize,
    pub response: String,
}

pub fn read_fixtures(path: &Path) -> anyhow::Result<Vec<FixtureEntry>> {
    let file = fs::File::open(path).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry = serde_json::from_str(&line).map_err(|e| anyhow::anyhow!("{}:{}: {e}", path.display(), i + 1))?;
        out.push(entry);
    }
    Ok(out)
}

pub fn write_fixtures(path: &Path, entries: &[FixtureEntry]) -> std::io::Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for e in entries {
        serde_json::to_writer(&mut out, e)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

/// Replays fixture responses keyed by (prompt hash, ordinal). When a prompt
/// is asked more often than it has responses, the responses repeat in
/// ordinal order.
#[derive(Debug, Clone, Default)]
pub struct ScriptedBackend {
    responses: HashMap<String, BTreeMap<usize, String>>,
}

impl ScriptedBackend {
    pub fn new(entries: impl IntoIterator<Item = FixtureEntry>) -> Self {
        let mut responses: HashMap<String, BTreeMap<usize, String>> = HashMap::new();
        for e in entries {
            responses.entry(e.prompt_sha256).or_default().insert(e.ordinal, e.response);
        }
        ScriptedBackend { responses }
    }

    pub fn from_file(path: &Path) -> anyhow::Result<Self> {
        Ok(Self::new(read_fixtures(path)?))
    }

    pub fn len(&self) -> usize {
        self.responses.values().map(BTreeMap::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }
}

impl GeneratorBackend for ScriptedBackend {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&self, req: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let missing = || BackendError::MissingFixture { prompt_sha256: req.prompt_sha256.to_string(), ordinal: req.ordinal };
        let by_ordinal = self.responses.get(req.prompt_sha256).ok_or_else(missing)?;
        if let Some(r) = by_ordinal.get(&req.ordinal) {
            return Ok(r.clone());
        }
        by_ordinal.values().nth(req.ordinal % by_ordinal.len()).cloned().ok_or_else(missing)
    }
}

/// Passes calls through and keeps every exchange as a fixture entry.
pub struct RecordingBackend {
    inner: Arc<dyn GeneratorBackend>,
    entries: Mutex<Vec<FixtureEntry>>,
}

impl RecordingBackend {
    pub fn new(inner: Arc<dyn GeneratorBackend>) -> Self {
        RecordingBackend { inner, entries: Mutex::new(Vec::new()) }
    }

    /// Recorded entries, first occurrence of each (hash, ordinal) only.
    pub fn entries(&self) -> Vec<FixtureEntry> {
        let entries = self.entries.lock().expect("recording lock");
        let mut seen = std::collections::HashSet::new();
        entries.iter().filter(|e| seen.insert((e.prompt_sha256.clone(), e.ordinal))).cloned().collect()
    }
}

impl GeneratorBackend for RecordingBackend {
    fn name(&self) -> &str {
        "recording"
    }

    fn complete(&self, req: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let response = self.inner.complete(req)?;
        self.entries.lock().expect("recording lock").push(FixtureEntry {
            prompt_sha256: req.prompt_sha256.to_string(),
            ordinal: req.ordinal,
            response: response.clone(),
        });
        Ok(response)
    }
}

/// An OpenAI-compatible `chat/completions` endpoint.
pub struct HttpBackend {
    client: reqwest::blocking::Client,
    url: String,
    model: String,
    api_key: Option<String>,
    max_retries: usize,
    backoff: Duration,
}

#[derive(Deserialize)]
struct ChatResponse {
    choices: Vec<ChatChoice>,
}

#[derive(Deserialize)]
struct ChatChoice {
    message: ChatMessage,
}

#[derive(Deserialize)]
struct ChatMessage {
    content: String,
}

impl HttpBackend {
    pub fn new(endpoint: &str, model: &str, api_key: Option<String>, max_retries: usize, timeout: Duration) -> Result<Self, BackendError> {
        let client = reqwest::blocking::Client::builder().timeout(timeout).build().map_err(|e| BackendError::Config(e.to_string()))?;
        Ok(HttpBackend {
            client,
            url: format!("{}/chat/completions", endpoint.trim_end_matches('/')),
            model: model.to_string(),
            api_key,
            max_retries,
            backoff: Duration::from_millis(500),
        })
    }

    pub fn with_backoff(mut self, backoff: Duration) -> Self {
        self.backoff = backoff;
        self
    }

    fn attempt(&self, req: &CompletionRequest<'_>) -> Result<String, (bool, String)> {
        let mut body = serde_json::json!({
            "model": self.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "temperature": req.temperature,
        });
        if let Some(seed) = req.seed {
            body["seed"] = seed.into();
        }
        let mut call = self.client.post(&self.url).json(&body);
        if let Some(key) = &self.api_key {
            call = call.bearer_auth(key);
        }
        let resp = call.send().map_err(|e| (true, e.to_string()))?;
        let status = resp.status();
        if !status.is_success() {
            let retry = status.as_u16() == 429 || status.is_server_error();
            return Err((retry, format!("HTTP {status}")));
        }
        let parsed: ChatResponse = resp.json().map_err(|e| (false, format!("bad response body: {e}")))?;
        parsed.choices.into_iter().next().map(|c| c.message.content).ok_or((false, "response has no choices".to_string()))
    }
}

impl GeneratorBackend for HttpBackend {
    fn name(&self) -> &str {
        "http"
    }

    fn complete(&self, req: &CompletionRequest<'_>) -> Result<String, BackendError> {
        let mut attempts = 0;
        loop {
            attempts += 1;
            match self.attempt(req) {
                Ok(text) => return Ok(text),
                Err((retry, message)) => {
                    if !retry || attempts > self.max_retries {
                        return Err(BackendError::Transport { attempts, message });
                    }
                    log::warn!("completion attempt {attempts} failed: {message}; retrying");
                    std::thread::sleep(self.backoff * attempts as u32);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendKind {
    #[default]
    Scripted,
    Http,
    /// The pool-driven simulated expert used to author fixtures.
    Expert,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BackendConfig {
    pub kind: BackendKind,
    /// Fixture JSONL for `scripted`.
    pub fixtures: Option<PathBuf>,
    /// Pool file for `expert`.
    pub pools: Option<PathBuf>,
    pub endpoint: String,
    pub model: String,
    pub api_key_env: String,
    pub max_retries: usize,
    pub timeout_secs: u64,
}

impl Default for BackendConfig {
    fn default() -> Self {
        BackendConfig {
            kind: BackendKind::Scripted,
            fixtures: None,
            pools: None,
            endpoint: "https://api.openai.com/v1".into(),
            model: "gpt-4o".into(),
            api_key_env: "OPENAI_API_KEY".into(),
            max_retries: 3,
            timeout_secs: 120,
        }
    }
}

impl BackendConfig {
    /// Builds the backend; relative paths resolve against `base`.
    pub fn build(&self, base: &Path) -> anyhow::Result<Arc<dyn GeneratorBackend>> {
        let resolve = |p: &Option<PathBuf>, what: &str| -> anyhow::Result<PathBuf> {
            let p = p.as_ref().ok_or_else(|| anyhow::anyhow!("backend `{what}` path is required"))?;
            Ok(if p.is_absolute() { p.clone() } else { base.join(p) })
        };
        Ok(match self.kind {
            BackendKind::Scripted => Arc::new(ScriptedBackend::from_file(&resolve(&self.fixtures, "fixtures")?)?),
            BackendKind::Expert => Arc::new(SimulatedExpert::from_file(&resolve(&self.pools, "pools")?)?),
            BackendKind::Http => {
                let key = std::env::var(&self.api_key_env).ok();
                if key.is_none() {
                    log::warn!("{} is not set; sending requests without an API key", self.api_key_env);
                }
                Arc::new(HttpBackend::new(&self.endpoint, &self.model, key, self.max_retries, Duration::from_secs(self.timeout_secs))?)
            }
        })
    }
}
