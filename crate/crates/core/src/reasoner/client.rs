//! Completion clients and the request log.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};
use thiserror::Error;

pub const ENV_ENDPOINT: &str = "GEOSYNTH_API_BASE";
pub const ENV_API_KEY: &str = "GEOSYNTH_API_KEY";

#[derive(Debug, Clone, PartialEq)]
pub struct Completion {
    pub text: String,
    pub latency_ms: u64,
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum ClientError {
    #[error("request budget of {0} exhausted")]
    Budget(u64),
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned status {0}: {1}")]
    Status(u16, String),
    #[error("unexpected response body: {0}")]
    Body(String),
    #[error("no fixture for prompt hash {0}")]
    NoFixture(String),
    #[error("client not configured: {0}")]
    Config(String),
}

/// A text-in, text-out language model endpoint.
pub trait CompletionClient: Send + Sync {
    /// Endpoint identity recorded in manifests.
    fn identity(&self) -> String;
    fn complete(&self, prompt: &str) -> Result<Completion, ClientError>;
}

/// Hex SHA-256 of a prompt; the mock fixture key.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// Settings of the HTTP client. Endpoint and credential come from the
/// environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClientSettings {
    pub model: String,
    pub temperature: f64,
    /// Requests in flight at once.
    pub window: usize,
    pub timeout_secs: u64,
    pub max_retries: u32,
    /// Total requests allowed; unset means unlimited.
    pub request_budget: Option<u64>,
}

impl Default for ClientSettings {
    fn default() -> Self {
        Self {
            model: "gpt-4o-mini".into(),
            temperature: 0.0,
            window: 32,
            timeout_secs: 120,
            max_retries: 3,
            request_budget: None,
        }
    }
}

/// Counting gate bounding concurrent requests.
struct Gate {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Gate {
    fn new(n: usize) -> Self {
        Self { free: Mutex::new(n.max(1)), cv: Condvar::new() }
    }

    fn run<T>(&self, f: impl FnOnce() -> T) -> T {
        let mut free = self.free.lock().expect("gate lock");
        while *free == 0 {
            free = self.cv.wait(free).expect("gate lock");
        }
        *free -= 1;
        drop(free);
        let out = f();
        *self.free.lock().expect("gate lock") += 1;
        self.cv.notify_one();
        out
    }
}

/// OpenAI-compatible chat-completions client.
pub struct HttpClient {
    settings: ClientSettings,
    endpoint: String,
    api_key: Option<String>,
    agent: ureq::Agent,
    used: AtomicU64,
    gate: Gate,
}

impl HttpClient {
    pub fn from_env(settings: ClientSettings) -> Result<Self, ClientError> {
        let endpoint = std::env::var(ENV_ENDPOINT)
            .map_err(|_| ClientError::Config(format!("{ENV_ENDPOINT} is not set")))?;
        let api_key = std::env::var(ENV_API_KEY).ok();
        Ok(Self::new(settings, endpoint, api_key))
    }

    pub fn new(settings: ClientSettings, endpoint: String, api_key: Option<String>) -> Self {
        let agent = ureq::AgentBuilder::new().timeout(Duration::from_secs(settings.timeout_secs)).build();
        let gate = Gate::new(settings.window);
        Self { settings, endpoint: endpoint.trim_end_matches('/').to_string(), api_key, agent, used: AtomicU64::new(0), gate }
    }

    fn once(&self, prompt: &str) -> Result<String, ClientError> {
        let body = serde_json::json!({
            "model": self.settings.model,
            "temperature": self.settings.temperature,
            "messages": [{"role": "user", "content": prompt}],
        });
        let mut req = self.agent.post(&format!("{}/chat/completions", self.endpoint));
        if let Some(k) = &self.api_key {
            req = req.set("Authorization", &format!("Bearer {k}"));
        }
        let resp = req.send_json(body).map_err(|e| match e {
            ureq::Error::Status(code, r) => ClientError::Status(code, r.into_string().unwrap_or_default()),
            ureq::Error::Transport(t) => ClientError::Transport(t.to_string()),
        })?;
        let v: serde_json::Value = resp.into_json().map_err(|e| ClientError::Body(e.to_string()))?;
        v["choices"][0]["message"]["content"]
            .as_str()
            .map(String::from)
            .ok_or_else(|| ClientError::Body(v.to_string()))
    }
}

impl CompletionClient for HttpClient {
    fn identity(&self) -> String {
        format!("http:{}#{}", self.endpoint, self.settings.model)
    }

    fn complete(&self, prompt: &str) -> Result<Completion, ClientError> {
        self.gate.run(|| {
            let start = Instant::now();
            let mut attempt = 0;
            loop {
                let n = self.used.fetch_add(1, Ordering::SeqCst);
                if let Some(b) = self.settings.request_budget {
                    if n >= b {
                        return Err(ClientError::Budget(b));
                    }
                }
                match self.once(prompt) {
                    Ok(text) => return Ok(Completion { text, latency_ms: start.elapsed().as_millis() as u64 }),
                    Err(e) => {
                        let transient = matches!(e, ClientError::Transport(_))
                            || matches!(e, ClientError::Status(c, _) if c == 429 || c >= 500);
                        if !transient || attempt >= self.settings.max_retries {
                            return Err(e);
                        }
                        std::thread::sleep(Duration::from_millis(500 << attempt));
                        attempt += 1;
                    }
                }
            }
        })
    }
}

/// Offline client: answers from a fixture table keyed by prompt hash,
/// falling back to a deterministic rule-based responder unless strict.
#[derive(Debug, Clone, Default)]
pub struct MockClient {
    fixtures: BTreeMap<String, String>,
    strict: bool,
}

impl MockClient {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_fixtures(fixtures: BTreeMap<String, String>) -> Self {
        Self { fixtures, strict: false }
    }

    /// Fixtures only; a prompt without a fixture is an error.
    pub fn strict(fixtures: BTreeMap<String, String>) -> Self {
        Self { fixtures, strict: true }
    }

    /// Reads a JSON object of prompt hash to response.
    pub fn load_fixtures(path: &Path) -> Result<BTreeMap<String, String>, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))
    }

    pub fn insert(&mut self, prompt: &str, response: impl Into<String>) {
        self.fixtures.insert(prompt_hash(prompt), response.into());
    }
}

impl CompletionClient for MockClient {
    fn identity(&self) -> String {
        format!("mock:{}", self.fixtures.len())
    }

    fn complete(&self, prompt: &str) -> Result<Completion, ClientError> {
        let h = prompt_hash(prompt);
        if let Some(r) = self.fixtures.get(&h) {
            return Ok(Completion { text: r.clone(), latency_ms: 0 });
        }
        if self.strict {
            return Err(ClientError::NoFixture(h));
        }
        Ok(Completion { text: super::mock::respond(prompt), latency_ms: 0 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub request_id: String,
    pub prompt_hash: String,
    pub prompt: String,
    pub response: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub latency_ms: u64,
}

/// Append-only log of every request, safe for concurrent use.
#[derive(Debug, Default)]
pub struct RequestLog {
    entries: Mutex<Vec<LogEntry>>,
}

impl RequestLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&self, e: LogEntry) {
        self.entries.lock().expect("log lock").push(e);
    }

    /// Entries ordered by request id.
    pub fn entries(&self) -> Vec<LogEntry> {
        let mut v = self.entries.lock().expect("log lock").clone();
        v.sort_by(|a, b| a.request_id.cmp(&b.request_id));
        v
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("log lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn to_jsonl(&self) -> String {
        self.entries()
            .iter()
            .map(|e| serde_json::to_string(e).expect("serializable") + "\n")
            .collect()
    }
}
