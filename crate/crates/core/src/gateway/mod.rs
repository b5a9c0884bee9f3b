//! Uniform access to model backends for the four pipeline roles.

mod limit;
mod mock;
#[cfg(feature = "remote")]
mod remote;
mod template;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use limit::{InFlight, TokenBucket};
pub use mock::{mock_solve, simulated_response, QualityModel, ScriptFn, ScriptedMock, SimulatedWorld, VariantDifficulty};
#[cfg(feature = "remote")]
pub use remote::{RemoteBackend, RemoteConfig};
pub use template::{render_prompt, template_text, TemplateId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Target,
    Verifier,
    Synthesizer,
    Judge,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transport {
    RemoteHttp,
    ScriptedMock,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: u32,
}

impl DecodeParams {
    /// Sampling used for Monte Carlo rollouts.
    pub const ROLLOUT: Self = Self { temperature: 1.0, top_p: 1.0, max_tokens: 2048 };
    /// Sampling used for pairwise difficulty judgments.
    pub const JUDGE: Self = Self { temperature: 0.6, top_p: 1.0, max_tokens: 1024 };

    pub fn validate(&self) -> Result<(), GatewayError> {
        if !(self.temperature >= 0.0) || !(self.top_p > 0.0 && self.top_p <= 1.0) || self.max_tokens == 0 {
            return Err(GatewayError::InvalidDecode(*self));
        }
        Ok(())
    }
}

/// A fully rendered request.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prompt {
    pub template_id: String,
    pub bindings: BTreeMap<String, String>,
    pub system: Option<String>,
    pub text: String,
    pub image_refs: Vec<String>,
    pub decode: DecodeParams,
}

impl Prompt {
    pub fn binding(&self, name: &str) -> Option<&str> {
        self.bindings.get(name).map(String::as_str)
    }

    pub fn with_images(mut self, image_refs: impl IntoIterator<Item = String>) -> Self {
        self.image_refs = image_refs.into_iter().collect();
        self
    }

    pub fn with_decode(mut self, decode: DecodeParams) -> Self {
        self.decode = decode;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    Stop,
    Length,
    Error,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Usage {
    pub prompt_tokens: u32,
    pub completion_tokens: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Completion {
    pub text: String,
    pub finish_reason: FinishReason,
    pub usage: Usage,
    pub latency_ms: u64,
}

/// Identifies one generation call. Deterministic backends derive all their
/// randomness from it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CallKey {
    pub seed: u64,
    pub item: String,
    pub index: u64,
}

impl CallKey {
    pub fn new(seed: u64, item: impl Into<String>, index: u64) -> Self {
        Self { seed, item: item.into(), index }
    }
}

#[derive(Debug, Error)]
pub enum GatewayError {
    #[error("unknown template `{0}`")]
    UnknownTemplate(String),
    #[error("template `{template}` is missing bindings: {}", .missing.join(", "))]
    MissingBinding { template: String, missing: Vec<String> },
    #[error("template `{template}` has no placeholders named: {}", .extra.join(", "))]
    ExtraBinding { template: String, extra: Vec<String> },
    #[error("invalid decode parameters {0:?}")]
    InvalidDecode(DecodeParams),
    #[error("backend `{backend}` failed after {attempts} attempts: {message}")]
    Exhausted { backend: String, attempts: u32, message: String },
    #[error("backend `{backend}` rejected the request: {message}")]
    Rejected { backend: String, message: String },
    #[error("backend configuration: {0}")]
    Config(String),
}

impl GatewayError {
    /// True for failures of the transport itself (as opposed to a bad
    /// request or configuration).
    pub fn is_transport(&self) -> bool {
        matches!(self, Self::Exhausted { .. } | Self::Rejected { .. })
    }
}

pub trait ModelBackend: Send + Sync {
    fn backend_id(&self) -> &str;
    fn roles(&self) -> &[Role];
    fn transport(&self) -> Transport;
    fn generate(&self, prompt: &Prompt, key: &CallKey) -> Result<Completion, GatewayError>;

    fn has_role(&self, role: Role) -> bool {
        self.roles().contains(&role)
    }
}

impl std::fmt::Debug for dyn ModelBackend {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelBackend").field("id", &self.backend_id()).field("transport", &self.transport()).finish()
    }
}
