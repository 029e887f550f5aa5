//! Uniform client for chat-completion endpoints: one OpenAI-style wire
//! format, retries with backoff, an optional rate limiter, and deterministic
//! record/replay cassettes for offline runs.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::{HashMap, VecDeque};
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Mutex;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use crate::error::GatewayError;
use crate::prompt::ChatMessage;

/// Where and how to reach one chat-completion endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointConfig {
    pub base_url: String,
    pub model_id: String,
    /// `None` means the endpoint's default temperature; the field is then
    /// omitted from the wire request entirely.
    pub temperature: Option<f64>,
    pub timeout_secs: u64,
    pub max_retries: u32,
    /// Name of the environment variable holding the bearer token; `None`
    /// for endpoints without auth.
    pub api_key_env_var: Option<String>,
    /// First backoff delay; doubles per attempt, jittered, capped at 60 s.
    pub retry_base_ms: u64,
}

impl EndpointConfig {
    pub fn new(base_url: impl Into<String>, model_id: impl Into<String>) -> Self {
        EndpointConfig {
            base_url: base_url.into(),
            model_id: model_id.into(),
            temperature: None,
            timeout_secs: 120,
            max_retries: 5,
            api_key_env_var: None,
            retry_base_ms: 1000,
        }
    }
}

/// The JSON body POSTed to `{base_url}/chat/completions`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub model: String,
    pub messages: Vec<ChatMessage>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<f64>,
}

/// One request/response pair, stored verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub digest: String,
    pub request: WireRequest,
    pub response_text: String,
    pub latency_secs: f64,
    pub attempt_count: u32,
    pub timestamp_unix: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GatewayMode {
    Live,
    Record,
    Replay,
}

impl fmt::Display for GatewayMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GatewayMode::Live => "live",
            GatewayMode::Record => "record",
            GatewayMode::Replay => "replay",
        })
    }
}

impl FromStr for GatewayMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "live" => Ok(GatewayMode::Live),
            "record" => Ok(GatewayMode::Record),
            "replay" => Ok(GatewayMode::Replay),
            other => Err(format!("unknown gateway mode '{other}' (live, record, or replay)")),
        }
    }
}

/// Stable digest of the rendered messages, used both as the transcript's
/// prompt fingerprint and (together with the model id) as the cassette key.
pub fn digest_messages(messages: &[ChatMessage]) -> String {
    let mut hasher = Sha256::new();
    for message in messages {
        hasher.update(serde_json::to_string(message).expect("message serializes"));
        hasher.update([0u8]);
    }
    hex::encode(hasher.finalize())
}

fn cassette_key(model_id: &str, digest: &str) -> String {
    format!("{model_id}\u{0}{digest}")
}

struct CassetteState {
    /// Replay entries keyed by (model, digest), consumed FIFO so repeated
    /// identical prompts (e.g. a re-ask) replay in recorded order.
    entries: HashMap<String, VecDeque<Exchange>>,
    writer: Option<BufWriter<File>>,
}

/// Shared handle for dispatching chat completions. Safe to use from several
/// session threads at once.
pub struct Gateway {
    mode: GatewayMode,
    cassette_path: Option<PathBuf>,
    cassette: Mutex<CassetteState>,
    limiter: Option<Mutex<Instant>>,
    min_interval: Duration,
    http: reqwest::blocking::Client,
}

impl Gateway {
    /// Builds a gateway. `Record` appends every exchange to the cassette
    /// (creating it if needed); `Replay` requires an existing cassette and
    /// never touches the network; `Live` ignores cassettes entirely.
    pub fn new(mode: GatewayMode, cassette_path: Option<&Path>) -> Result<Self, GatewayError> {
        let mut entries = HashMap::new();
        let mut writer = None;
        let mut stored_path = None;
        match mode {
            GatewayMode::Live => {}
            GatewayMode::Record => {
                let path = cassette_path.expect("record mode requires a cassette path");
                let file = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .map_err(|e| GatewayError::CassetteIo {
                        path: path.display().to_string(),
                        detail: e.to_string(),
                    })?;
                writer = Some(BufWriter::new(file));
                stored_path = Some(path.to_path_buf());
            }
            GatewayMode::Replay => {
                let path = cassette_path.expect("replay mode requires a cassette path");
                if !path.exists() {
                    return Err(GatewayError::CassetteMissing {
                        path: path.display().to_string(),
                    });
                }
                entries = load_cassette(path)?;
                stored_path = Some(path.to_path_buf());
            }
        }
        Ok(Gateway {
            mode,
            cassette_path: stored_path,
            cassette: Mutex::new(CassetteState { entries, writer }),
            limiter: None,
            min_interval: Duration::ZERO,
            http: reqwest::blocking::Client::new(),
        })
    }

    pub fn live() -> Self {
        Gateway::new(GatewayMode::Live, None).expect("live gateway cannot fail")
    }

    pub fn mode(&self) -> GatewayMode {
        self.mode
    }

    /// Caps outbound dispatch at `requests_per_minute`; replay is never
    /// limited.
    pub fn with_rate_limit(mut self, requests_per_minute: u32) -> Self {
        assert!(requests_per_minute > 0);
        self.min_interval = Duration::from_secs_f64(60.0 / requests_per_minute as f64);
        self.limiter = Some(Mutex::new(Instant::now() - self.min_interval));
        self
    }

    /// Sends one chat completion and returns the full exchange. In replay
    /// mode the response comes from the cassette with zero network calls.
    pub fn chat_complete(
        &self,
        config: &EndpointConfig,
        messages: &[ChatMessage],
    ) -> Result<Exchange, GatewayError> {
        let request = WireRequest {
            model: config.model_id.clone(),
            messages: messages.to_vec(),
            temperature: config.temperature,
        };
        let digest = digest_messages(messages);

        if self.mode == GatewayMode::Replay {
            let key = cassette_key(&config.model_id, &digest);
            let mut state = self.cassette.lock().unwrap();
            return match state.entries.get_mut(&key).and_then(VecDeque::pop_front) {
                Some(exchange) => Ok(exchange),
                None => Err(GatewayError::CassetteMiss {
                    digest,
                    model: config.model_id.clone(),
                }),
            };
        }

        let (response_text, attempt_count, latency_secs) = self.send_live(config, &request)?;
        let exchange = Exchange {
            digest,
            request,
            response_text,
            latency_secs,
            attempt_count,
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs_f64())
                .unwrap_or(0.0),
        };
        if self.mode == GatewayMode::Record {
            self.append_to_cassette(&exchange)?;
        }
        Ok(exchange)
    }

    fn append_to_cassette(&self, exchange: &Exchange) -> Result<(), GatewayError> {
        let path = self
            .cassette_path
            .as_ref()
            .map(|p| p.display().to_string())
            .unwrap_or_default();
        let mut state = self.cassette.lock().unwrap();
        let writer = state.writer.as_mut().expect("record mode has a writer");
        let line = serde_json::to_string(exchange).expect("exchange serializes");
        writeln!(writer, "{line}")
            .and_then(|_| writer.flush())
            .map_err(|e| GatewayError::CassetteIo {
                path,
                detail: e.to_string(),
            })
    }

    fn send_live(
        &self,
        config: &EndpointConfig,
        request: &WireRequest,
    ) -> Result<(String, u32, f64), GatewayError> {
        // Resolve auth up front so a missing key fails before any request.
        let api_key = match &config.api_key_env_var {
            Some(var) if !var.is_empty() => {
                Some(
                    std::env::var(var).map_err(|_| GatewayError::MissingApiKey {
                        var: var.clone(),
                    })?,
                )
            }
            _ => None,
        };
        let url = format!(
            "{}/chat/completions",
            config.base_url.trim_end_matches('/')
        );

        let start = Instant::now();
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            self.throttle();
            let mut builder = self
                .http
                .post(&url)
                .timeout(Duration::from_secs(config.timeout_secs))
                .json(request);
            if let Some(key) = &api_key {
                builder = builder.bearer_auth(key);
            }

            let failure: String = match builder.send() {
                Ok(response) => {
                    let status = response.status().as_u16();
                    let body = response.text().unwrap_or_default();
                    if (200..300).contains(&status) {
                        let text = extract_content(&body)?;
                        return Ok((text, attempt, start.elapsed().as_secs_f64()));
                    }
                    if status == 401 || status == 403 {
                        return Err(GatewayError::Auth {
                            status,
                            detail: truncate(&body),
                        });
                    }
                    if status != 429 && !(500..600).contains(&status) {
                        return Err(GatewayError::Exhausted {
                            attempts: attempt,
                            detail: format!("HTTP {status}: {}", truncate(&body)),
                        });
                    }
                    format!("HTTP {status}")
                }
                Err(e) => e.to_string(),
            };

            if attempt > config.max_retries {
                return Err(GatewayError::Exhausted {
                    attempts: attempt,
                    detail: failure,
                });
            }
            std::thread::sleep(backoff_delay(config.retry_base_ms, attempt));
        }
    }

    fn throttle(&self) {
        if let Some(limiter) = &self.limiter {
            let mut last = limiter.lock().unwrap();
            let elapsed = last.elapsed();
            if elapsed < self.min_interval {
                std::thread::sleep(self.min_interval - elapsed);
            }
            *last = Instant::now();
        }
    }
}

/// Exponential backoff with full jitter, capped at 60 s. The jitter draws
/// from the thread rng; it is operational timing only and takes no part in
/// the experiment's determinism.
fn backoff_delay(base_ms: u64, attempt: u32) -> Duration {
    use rand::Rng;
    let cap_ms = 60_000u64;
    let exp_ms = base_ms.saturating_mul(1u64 << (attempt - 1).min(20)).min(cap_ms);
    let jittered = rand::thread_rng().gen_range(exp_ms / 2..=exp_ms);
    Duration::from_millis(jittered)
}

fn truncate(body: &str) -> String {
    const LIMIT: usize = 200;
    if body.len() <= LIMIT {
        body.to_string()
    } else {
        format!("{}...", &body[..LIMIT])
    }
}

/// Pulls the first choice's message content out of a chat-completion
/// response body.
fn extract_content(body: &str) -> Result<String, GatewayError> {
    let value: serde_json::Value =
        serde_json::from_str(body).map_err(|e| GatewayError::MalformedResponse {
            detail: format!("{e}: {}", truncate(body)),
        })?;
    value["choices"][0]["message"]["content"]
        .as_str()
        .map(str::to_string)
        .ok_or_else(|| GatewayError::MalformedResponse {
            detail: format!("no choices[0].message.content in {}", truncate(body)),
        })
}

fn load_cassette(path: &Path) -> Result<HashMap<String, VecDeque<Exchange>>, GatewayError> {
    let file = File::open(path).map_err(|e| GatewayError::CassetteIo {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    let mut entries: HashMap<String, VecDeque<Exchange>> = HashMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| GatewayError::CassetteIo {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let exchange: Exchange =
            serde_json::from_str(&line).map_err(|e| GatewayError::CassetteParse {
                path: path.display().to_string(),
                line: idx + 1,
                detail: e.to_string(),
            })?;
        entries
            .entry(cassette_key(&exchange.request.model, &exchange.digest))
            .or_default()
            .push_back(exchange);
    }
    Ok(entries)
}

/// Appends synthetic exchanges to a cassette file without a gateway; used to
/// build offline fixtures.
pub fn append_exchanges(path: &Path, exchanges: &[Exchange]) -> Result<(), GatewayError> {
    let file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| GatewayError::CassetteIo {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
    let mut writer = BufWriter::new(file);
    for exchange in exchanges {
        let line = serde_json::to_string(exchange).expect("exchange serializes");
        writeln!(writer, "{line}").map_err(|e| GatewayError::CassetteIo {
            path: path.display().to_string(),
            detail: e.to_string(),
        })?;
    }
    writer.flush().map_err(|e| GatewayError::CassetteIo {
        path: path.display().to_string(),
        detail: e.to_string(),
    })
}

/// Builds a cassette entry for a known prompt/response pair.
pub fn synthetic_exchange(
    model_id: &str,
    temperature: Option<f64>,
    messages: &[ChatMessage],
    response_text: &str,
) -> Exchange {
    Exchange {
        digest: digest_messages(messages),
        request: WireRequest {
            model: model_id.to_string(),
            messages: messages.to_vec(),
            temperature,
        },
        response_text: response_text.to_string(),
        latency_secs: 0.0,
        attempt_count: 1,
        timestamp_unix: 0.0,
    }
}
