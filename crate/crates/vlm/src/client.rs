//! Chat-with-images clients: HTTP, scripted mock and transcript replay.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use base64::Engine;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::request::{Stage, Usage, VlmRequest, VlmResponse};
use crate::transcript::{read_transcript, TranscriptError, TranscriptRecord};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ClientError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("transport error: {0}")]
    Transport(String),
    #[error("unexpected response body: {0}")]
    BadBody(String),
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted {
        attempts: u32,
        last: Box<ClientError>,
    },
    #[error("replay: {0}")]
    Replay(String),
    #[error("mock: {0}")]
    Mock(String),
}

impl ClientError {
    fn retryable(&self) -> bool {
        match self {
            ClientError::Transport(_) => true,
            ClientError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

pub trait VlmClient: Send + Sync {
    fn model(&self) -> &str;
    fn complete(&self, request: &VlmRequest) -> Result<VlmResponse, ClientError>;
}

fn default_key_env() -> String {
    "OPENAI_API_KEY".into()
}
fn default_timeout() -> u64 {
    120
}
fn default_concurrency() -> usize {
    2
}
fn default_retries() -> u32 {
    3
}
fn default_backoff() -> u64 {
    1000
}

/// Endpoint settings, read from TOML. The key itself is only ever taken
/// from the environment variable named by `api_key_env`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    /// Base URL of an OpenAI-compatible API, e.g. `https://api.openai.com/v1`.
    pub base_url: String,
    pub model: String,
    #[serde(default = "default_key_env")]
    pub api_key_env: String,
    #[serde(default)]
    pub temperature: f64,
    #[serde(default = "default_timeout")]
    pub timeout_secs: u64,
    #[serde(default = "default_concurrency")]
    pub max_concurrency: usize,
    #[serde(default = "default_retries")]
    pub max_retries: u32,
    #[serde(default = "default_backoff")]
    pub backoff_ms: u64,
}

impl EndpointConfig {
    pub fn from_toml(text: &str) -> Result<EndpointConfig, ClientError> {
        let c: EndpointConfig =
            toml::from_str(text).map_err(|e| ClientError::Config(e.to_string()))?;
        if c.max_concurrency == 0 {
            return Err(ClientError::Config(
                "max_concurrency must be at least 1".into(),
            ));
        }
        if !(c.temperature >= 0.0 && c.temperature.is_finite()) {
            return Err(ClientError::Config(
                "temperature must be non-negative".into(),
            ));
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<EndpointConfig, ClientError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ClientError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }
}

/// Counting semaphore bounding in-flight requests.
struct Slots {
    free: Mutex<usize>,
    cv: Condvar,
}

struct SlotGuard<'a>(&'a Slots);

impl Slots {
    fn new(n: usize) -> Slots {
        Slots {
            free: Mutex::new(n),
            cv: Condvar::new(),
        }
    }

    fn acquire(&self) -> SlotGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        SlotGuard(self)
    }
}

impl Drop for SlotGuard<'_> {
    fn drop(&mut self) {
        let mut free = self.0.free.lock().unwrap_or_else(|e| e.into_inner());
        *free += 1;
        self.0.cv.notify_one();
    }
}

pub struct HttpClient {
    config: EndpointConfig,
    key: String,
    http: reqwest::blocking::Client,
    slots: Slots,
}

impl HttpClient {
    /// Fails when the API key variable is unset or empty.
    pub fn new(config: EndpointConfig) -> Result<HttpClient, ClientError> {
        let key = std::env::var(&config.api_key_env)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| {
                ClientError::Config(format!(
                    "environment variable {} is not set",
                    config.api_key_env
                ))
            })?;
        let http = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(config.timeout_secs))
            .build()
            .map_err(|e| ClientError::Config(e.to_string()))?;
        Ok(HttpClient {
            slots: Slots::new(config.max_concurrency),
            config,
            key,
            http,
        })
    }

    pub fn config(&self) -> &EndpointConfig {
        &self.config
    }

    fn once(&self, body: &Value) -> Result<VlmResponse, ClientError> {
        let url = format!(
            "{}/chat/completions",
            self.config.base_url.trim_end_matches('/')
        );
        let start = Instant::now();
        let resp = self
            .http
            .post(url)
            .bearer_auth(&self.key)
            .json(body)
            .send()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = resp.status();
        let text = resp
            .text()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        if !status.is_success() {
            return Err(ClientError::Http {
                status: status.as_u16(),
                body: text.chars().take(2000).collect(),
            });
        }
        let mut r = parse_chat_response(&text)?;
        r.latency_ms = start.elapsed().as_millis() as u64;
        Ok(r)
    }
}

/// OpenAI-style chat request: one user message with the images first, in
/// order, then the text.
pub fn chat_request_body(req: &VlmRequest) -> Value {
    let b64 = base64::engine::general_purpose::STANDARD;
    let mut content: Vec<Value> = req
        .images
        .iter()
        .map(|img| {
            json!({
                "type": "image_url",
                "image_url": {"url": format!("data:{};base64,{}", img.media_type, b64.encode(img.bytes.as_slice()))}
            })
        })
        .collect();
    content.push(json!({"type": "text", "text": req.text}));
    json!({
        "model": req.model,
        "temperature": req.temperature,
        "messages": [{"role": "user", "content": content}],
    })
}

pub fn parse_chat_response(body: &str) -> Result<VlmResponse, ClientError> {
    let v: Value = serde_json::from_str(body).map_err(|e| ClientError::BadBody(e.to_string()))?;
    let text = v
        .pointer("/choices/0/message/content")
        .and_then(|c| c.as_str())
        .ok_or_else(|| ClientError::BadBody("missing choices[0].message.content".into()))?;
    let usage = Usage {
        prompt_tokens: v.pointer("/usage/prompt_tokens").and_then(|x| x.as_u64()),
        completion_tokens: v
            .pointer("/usage/completion_tokens")
            .and_then(|x| x.as_u64()),
    };
    Ok(VlmResponse {
        text: text.to_string(),
        usage,
        latency_ms: 0,
    })
}

impl VlmClient for HttpClient {
    fn model(&self) -> &str {
        &self.config.model
    }

    fn complete(&self, request: &VlmRequest) -> Result<VlmResponse, ClientError> {
        let body = chat_request_body(request);
        let _slot = self.slots.acquire();
        let attempts = self.config.max_retries + 1;
        let mut last = None;
        for attempt in 0..attempts {
            if attempt > 0 {
                std::thread::sleep(Duration::from_millis(
                    self.config.backoff_ms << (attempt - 1).min(6),
                ));
            }
            match self.once(&body) {
                Ok(r) => return Ok(r),
                Err(e) if e.retryable() => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(ClientError::Exhausted {
            attempts,
            last: Box::new(last.expect("at least one attempt")),
        })
    }
}

/// Scripted responses per stage; repeat `r` gets entry `r % len`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockClient {
    #[serde(default = "mock_model")]
    pub model: String,
    pub responses: BTreeMap<Stage, Vec<String>>,
}

fn mock_model() -> String {
    "mock".into()
}

impl MockClient {
    pub fn new(responses: BTreeMap<Stage, Vec<String>>) -> MockClient {
        MockClient {
            model: mock_model(),
            responses,
        }
    }

    /// Reads `{"responses": {"part_list": ["..."], ...}}`; a bare string is
    /// accepted in place of a one-element list.
    pub fn from_json(text: &str) -> Result<MockClient, ClientError> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum OneOrMany {
            One(String),
            Many(Vec<String>),
        }
        #[derive(Deserialize)]
        struct File {
            #[serde(default = "mock_model")]
            model: String,
            responses: BTreeMap<Stage, OneOrMany>,
        }
        let f: File = serde_json::from_str(text).map_err(|e| ClientError::Config(e.to_string()))?;
        Ok(MockClient {
            model: f.model,
            responses: f
                .responses
                .into_iter()
                .map(|(k, v)| {
                    (
                        k,
                        match v {
                            OneOrMany::One(s) => vec![s],
                            OneOrMany::Many(v) => v,
                        },
                    )
                })
                .collect(),
        })
    }
}

impl VlmClient for MockClient {
    fn model(&self) -> &str {
        &self.model
    }

    fn complete(&self, request: &VlmRequest) -> Result<VlmResponse, ClientError> {
        let list = self
            .responses
            .get(&request.stage)
            .filter(|l| !l.is_empty())
            .ok_or_else(|| {
                ClientError::Mock(format!("no response scripted for stage {}", request.stage))
            })?;
        Ok(VlmResponse::text(list[request.run % list.len()].clone()))
    }
}

/// Serves responses from a recorded transcript, matched by repeat and
/// stage. In strict mode the request must hash to the recorded key.
pub struct ReplayClient {
    model: String,
    records: BTreeMap<(usize, Stage), TranscriptRecord>,
    strict: bool,
}

impl ReplayClient {
    pub fn new(records: Vec<TranscriptRecord>, strict: bool) -> Result<ReplayClient, ClientError> {
        let model = records
            .first()
            .map(|r| r.request.model.clone())
            .ok_or_else(|| ClientError::Replay("transcript is empty".into()))?;
        let mut map = BTreeMap::new();
        for r in records {
            let k = (r.run, r.stage);
            if map.insert(k, r).is_some() {
                return Err(ClientError::Replay(format!(
                    "duplicate record for run {} stage {}",
                    k.0, k.1
                )));
            }
        }
        Ok(ReplayClient {
            model,
            records: map,
            strict,
        })
    }

    pub fn open(path: &Path, strict: bool) -> Result<ReplayClient, ClientError> {
        let recs = read_transcript(path)
            .map_err(|e: TranscriptError| ClientError::Replay(e.to_string()))?;
        Self::new(recs, strict)
    }

    /// Number of repeats recorded.
    pub fn runs(&self) -> usize {
        self.records.keys().map(|k| k.0 + 1).max().unwrap_or(0)
    }
}

impl VlmClient for ReplayClient {
    fn model(&self) -> &str {
        &self.model
    }

    fn complete(&self, request: &VlmRequest) -> Result<VlmResponse, ClientError> {
        let rec = self
            .records
            .get(&(request.run, request.stage))
            .ok_or_else(|| {
                ClientError::Replay(format!(
                    "no record for run {} stage {}",
                    request.run, request.stage
                ))
            })?;
        if self.strict && rec.key != request.key() {
            return Err(ClientError::Replay(format!(
                "request for run {} stage {} differs from the recorded one",
                request.run, request.stage
            )));
        }
        Ok(rec.response.clone())
    }
}
