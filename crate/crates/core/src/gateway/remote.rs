use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{CallKey, Completion, FinishReason, GatewayError, InFlight, ModelBackend, Prompt, Role, TokenBucket, Transport, Usage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RemoteConfig {
    /// Full URL of the generation endpoint.
    pub base_url: String,
    pub model: String,
    /// Environment variable holding the bearer token, if any.
    pub api_key_env: Option<String>,
    pub rate_per_sec: f64,
    pub burst: u32,
    /// Total attempts per request, including the first.
    pub max_retries: u32,
    pub max_in_flight: usize,
    pub timeout_ms: u64,
    pub backoff_base_ms: u64,
    pub backoff_cap_ms: u64,
}

impl Default for RemoteConfig {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8000/v1/generate".into(),
            model: String::new(),
            api_key_env: None,
            rate_per_sec: 5.0,
            burst: 5,
            max_retries: 5,
            max_in_flight: 8,
            timeout_ms: 120_000,
            backoff_base_ms: 500,
            backoff_cap_ms: 30_000,
        }
    }
}

#[derive(Serialize)]
struct WireMessage<'a> {
    role: &'a str,
    text: &'a str,
    image_refs: &'a [String],
}

#[derive(Serialize)]
struct WireRequest<'a> {
    model: &'a str,
    messages: Vec<WireMessage<'a>>,
    temperature: f64,
    top_p: f64,
    max_tokens: u32,
}

#[derive(Deserialize)]
struct WireResponse {
    text: String,
    finish_reason: FinishReason,
    #[serde(default)]
    usage: Usage,
}

/// JSON-over-HTTP backend with retry, exponential backoff, a token-bucket
/// rate limit and a cap on concurrent requests.
pub struct RemoteBackend {
    id: String,
    roles: Vec<Role>,
    cfg: RemoteConfig,
    api_key: Option<String>,
    agent: ureq::Agent,
    limiter: TokenBucket,
    in_flight: InFlight,
}

impl RemoteBackend {
    pub fn new(id: impl Into<String>, roles: impl IntoIterator<Item = Role>, cfg: RemoteConfig) -> Result<Self, GatewayError> {
        if cfg.max_retries == 0 {
            return Err(GatewayError::Config("max_retries must be at least 1".into()));
        }
        let api_key = match &cfg.api_key_env {
            Some(var) => Some(std::env::var(var).map_err(|_| GatewayError::Config(format!("environment variable {var} is not set")))?),
            None => None,
        };
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(cfg.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(Self {
            id: id.into(),
            roles: roles.into_iter().collect(),
            limiter: TokenBucket::new(cfg.rate_per_sec, cfg.burst),
            in_flight: InFlight::new(cfg.max_in_flight),
            api_key,
            agent,
            cfg,
        })
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let ms = self.cfg.backoff_base_ms.saturating_mul(1u64 << (attempt - 1).min(30));
        Duration::from_millis(ms.min(self.cfg.backoff_cap_ms))
    }
}

enum Attempt {
    Done(WireResponse),
    Retry(String),
    Fatal(String),
}

impl ModelBackend for RemoteBackend {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn roles(&self) -> &[Role] {
        &self.roles
    }

    fn transport(&self) -> Transport {
        Transport::RemoteHttp
    }

    fn generate(&self, prompt: &Prompt, _key: &CallKey) -> Result<Completion, GatewayError> {
        prompt.decode.validate()?;
        let mut messages = Vec::with_capacity(2);
        if let Some(system) = &prompt.system {
            messages.push(WireMessage { role: "system", text: system, image_refs: &[] });
        }
        messages.push(WireMessage { role: "user", text: &prompt.text, image_refs: &prompt.image_refs });
        let body = WireRequest {
            model: &self.cfg.model,
            messages,
            temperature: prompt.decode.temperature,
            top_p: prompt.decode.top_p,
            max_tokens: prompt.decode.max_tokens,
        };

        let _slot = self.in_flight.acquire();
        let start = Instant::now();
        let mut last_error = String::new();
        for attempt in 1..=self.cfg.max_retries {
            self.limiter.acquire();
            let mut request = self.agent.post(&self.cfg.base_url);
            if let Some(key) = &self.api_key {
                request = request.header("Authorization", &format!("Bearer {key}"));
            }
            let outcome = match request.send_json(&body) {
                Ok(mut resp) => {
                    let status = resp.status().as_u16();
                    if (200..300).contains(&status) {
                        match resp.body_mut().read_json::<WireResponse>() {
                            Ok(wire) => Attempt::Done(wire),
                            Err(e) => Attempt::Fatal(format!("malformed response body: {e}")),
                        }
                    } else if status == 429 || status >= 500 {
                        Attempt::Retry(format!("HTTP {status}"))
                    } else {
                        let text = resp.body_mut().read_to_string().unwrap_or_default();
                        Attempt::Fatal(format!("HTTP {status}: {text}"))
                    }
                }
                Err(e) => Attempt::Retry(e.to_string()),
            };
            match outcome {
                Attempt::Done(wire) => {
                    let text = if wire.finish_reason == FinishReason::Error { String::new() } else { wire.text };
                    return Ok(Completion {
                        text,
                        finish_reason: wire.finish_reason,
                        usage: wire.usage,
                        latency_ms: start.elapsed().as_millis() as u64,
                    });
                }
                Attempt::Fatal(message) => return Err(GatewayError::Rejected { backend: self.id.clone(), message }),
                Attempt::Retry(message) => last_error = message,
            }
            if attempt < self.cfg.max_retries {
                std::thread::sleep(self.backoff(attempt));
            }
        }
        Err(GatewayError::Exhausted { backend: self.id.clone(), attempts: self.cfg.max_retries, message: last_error })
    }
}
