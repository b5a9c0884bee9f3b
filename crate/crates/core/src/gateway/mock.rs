use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{CallKey, Completion, FinishReason, GatewayError, ModelBackend, Prompt, Role, Transport, Usage};
use crate::dataset::Sample;
use crate::keyed::KeyedRng;

pub type ScriptFn = dyn Fn(&Prompt, &CallKey) -> String + Send + Sync;

/// Deterministic in-process backend: every reply is a pure function of the
/// prompt and the call key. At temperature 0 the call index is ignored, so
/// repeated greedy calls return the same text.
pub struct ScriptedMock {
    id: String,
    roles: Vec<Role>,
    script: Arc<ScriptFn>,
    calls: AtomicU64,
}

impl ScriptedMock {
    pub fn new(
        id: impl Into<String>,
        roles: impl IntoIterator<Item = Role>,
        script: impl Fn(&Prompt, &CallKey) -> String + Send + Sync + 'static,
    ) -> Self {
        Self { id: id.into(), roles: roles.into_iter().collect(), script: Arc::new(script), calls: AtomicU64::new(0) }
    }

    /// Replies with `text` to every prompt.
    pub fn fixed(id: impl Into<String>, roles: impl IntoIterator<Item = Role>, text: impl Into<String>) -> Self {
        let text = text.into();
        Self::new(id, roles, move |_, _| text.clone())
    }

    /// Replies with `replies[key.index % len]`.
    pub fn cycle(id: impl Into<String>, roles: impl IntoIterator<Item = Role>, replies: Vec<String>) -> Self {
        assert!(!replies.is_empty(), "cycle needs at least one reply");
        Self::new(id, roles, move |_, key| replies[(key.index % replies.len() as u64) as usize].clone())
    }

    /// Number of `generate` calls served so far.
    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

fn word_count(s: &str) -> u32 {
    s.split_whitespace().count() as u32
}

impl ModelBackend for ScriptedMock {
    fn backend_id(&self) -> &str {
        &self.id
    }

    fn roles(&self) -> &[Role] {
        &self.roles
    }

    fn transport(&self) -> Transport {
        Transport::ScriptedMock
    }

    fn generate(&self, prompt: &Prompt, key: &CallKey) -> Result<Completion, GatewayError> {
        prompt.decode.validate()?;
        self.calls.fetch_add(1, Ordering::Relaxed);
        let text = if prompt.decode.temperature == 0.0 && key.index != 0 {
            (self.script)(prompt, &CallKey { index: 0, ..key.clone() })
        } else {
            (self.script)(prompt, key)
        };
        let usage = Usage { prompt_tokens: word_count(&prompt.text), completion_tokens: word_count(&text) };
        Ok(Completion { text, finish_reason: FinishReason::Stop, usage, latency_ms: 0 })
    }
}

/// An answer that no match policy can equate with `answer`.
fn wrong_answer(answer: &str) -> String {
    format!("not {answer}")
}

/// A reasoning-template style response that boxes `answer` with probability
/// `p_solve` and a wrong answer otherwise, drawn from the keyed stream of
/// `key`.
pub fn simulated_response(answer: &str, p_solve: f64, key: &CallKey) -> String {
    let mut rng = KeyedRng::new(key.seed, &key.item, key.index);
    let solved = rng.bernoulli(p_solve);
    let steps = 2 + (rng.next_u64() % 4) as usize;
    let mut think = String::from("<think>");
    for s in 0..steps {
        if s > 0 {
            think.push('\n');
        }
        think.push_str(&format!("Step {}: work through the figure.", s + 1));
    }
    think.push_str("</think>");
    let boxed = if solved { answer.to_string() } else { wrong_answer(answer) };
    format!("{think}\n\\boxed{{{boxed}}}")
}

/// One simulated rollout for `sample`, keyed by `(rng_seed, sample.id,
/// call_index)`.
pub fn mock_solve(sample: &Sample, p_solve: f64, rng_seed: u64, call_index: u64) -> Completion {
    let text = simulated_response(&sample.answer, p_solve, &CallKey::new(rng_seed, sample.id.clone(), call_index));
    let usage = Usage { prompt_tokens: word_count(&sample.question), completion_tokens: word_count(&text) };
    Completion { text, finish_reason: FinishReason::Stop, usage, latency_ms: 0 }
}

/// Solve probability of synthesized variants in a [`SimulatedWorld`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum VariantDifficulty {
    Fixed { p: f64 },
    /// Parent probability times `factor`.
    Scaled { factor: f64 },
    /// Drawn once per variant text from `[lo, hi)`.
    Uniform { lo: f64, hi: f64 },
}

/// Scores returned by the simulated quality judge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum QualityModel {
    Fixed { score: f64 },
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone)]
struct Profile {
    answer: String,
    p_solve: f64,
    theta: f64,
}

const VARIANT_OPEN: &str = " (Variant ";
const VARIANT_CLOSE: &str = ": justify every intermediate quantity before answering.)";

/// Ground truth for offline runs: which answer each question has, how likely
/// the simulated policy is to solve it, and its latent difficulty. Backends
/// built from one world agree with each other, so a synthesized variant is
/// solved by the simulated verifier at the variant's configured rate.
#[derive(Debug, Clone)]
pub struct SimulatedWorld {
    profiles: HashMap<String, Profile>,
    pub variant: VariantDifficulty,
    pub quality: QualityModel,
    /// Probability that the simulated synthesizer omits the `New Question:`
    /// marker.
    pub marker_drop_rate: f64,
    /// Probability that the simulated battle judge declares a tie.
    pub tie_rate: f64,
}

impl Default for SimulatedWorld {
    fn default() -> Self {
        Self {
            profiles: HashMap::new(),
            variant: VariantDifficulty::Fixed { p: 0.4 },
            quality: QualityModel::Fixed { score: 0.9 },
            marker_drop_rate: 0.0,
            tie_rate: 0.0,
        }
    }
}

impl SimulatedWorld {
    pub fn add_question(&mut self, question: impl Into<String>, answer: impl Into<String>, p_solve: f64, theta: f64) {
        self.profiles.insert(question.into(), Profile { answer: answer.into(), p_solve, theta });
    }

    /// Reads `mock_p_solve` and `mock_theta` from each sample's meta, using
    /// the defaults when absent.
    pub fn from_samples<'a>(samples: impl IntoIterator<Item = &'a Sample>, default_p: f64) -> Self {
        let mut world = Self::default();
        for s in samples {
            let p = s.meta.get("mock_p_solve").and_then(|v| v.as_f64()).unwrap_or(default_p);
            let theta = s.meta.get("mock_theta").and_then(|v| v.as_f64()).unwrap_or(0.0);
            world.add_question(s.question.clone(), s.answer.clone(), p, theta);
        }
        world
    }

    /// Text the simulated synthesizer produces for `question` on attempt
    /// `attempt`.
    pub fn variant_question(question: &str, attempt: u64) -> String {
        format!("{question}{VARIANT_OPEN}{attempt}{VARIANT_CLOSE}")
    }

    fn variant_base(question: &str) -> Option<&str> {
        let head = question.strip_suffix(VARIANT_CLOSE)?;
        let (base, attempt) = head.rsplit_once(VARIANT_OPEN)?;
        attempt.parse::<u64>().ok().map(|_| base)
    }

    /// Answer and solve probability for `question`, if the world knows it.
    pub fn resolve(&self, question: &str) -> Option<(&str, f64)> {
        if let Some(p) = self.profiles.get(question) {
            return Some((&p.answer, p.p_solve));
        }
        let base = Self::variant_base(question)?;
        let (answer, base_p) = self.resolve(base)?;
        let p = match self.variant {
            VariantDifficulty::Fixed { p } => p,
            VariantDifficulty::Scaled { factor } => base_p * factor,
            VariantDifficulty::Uniform { lo, hi } => lo + (hi - lo) * KeyedRng::new(0, question, 0).next_f64(),
        };
        Some((answer, p.clamp(0.0, 1.0)))
    }

    pub fn theta(&self, question: &str) -> f64 {
        self.profiles.get(question).map_or(0.0, |p| p.theta)
    }

    /// Policy that answers reasoning prompts at each question's solve rate.
    pub fn solver(self: &Arc<Self>, id: impl Into<String>) -> ScriptedMock {
        let world = Arc::clone(self);
        ScriptedMock::new(id, [Role::Target, Role::Verifier], move |prompt, key| {
            match prompt.binding("question").and_then(|q| world.resolve(q)) {
                Some((answer, p)) => simulated_response(answer, p, key),
                None => "<think>I cannot relate this question to the figure.</think>".to_string(),
            }
        })
    }

    /// Synthesizer that appends a variant clause; call index = attempt.
    pub fn synthesizer(self: &Arc<Self>, id: impl Into<String>) -> ScriptedMock {
        let world = Arc::clone(self);
        ScriptedMock::new(id, [Role::Synthesizer], move |prompt, key| {
            let question = prompt.binding("question").unwrap_or_default();
            let variant = SimulatedWorld::variant_question(question, key.index);
            let mut rng = KeyedRng::new(key.seed, &key.item, key.index ^ 0x5157);
            if rng.bernoulli(world.marker_drop_rate) {
                format!("Sure. A harder version would be: {variant}")
            } else {
                format!("Here is a harder version.\n\nNew Question: {variant}")
            }
        })
    }

    /// Quality judge replying `SCORE: x`.
    pub fn quality_judge(self: &Arc<Self>, id: impl Into<String>) -> ScriptedMock {
        let world = Arc::clone(self);
        ScriptedMock::new(id, [Role::Judge], move |prompt, _| {
            let candidate = prompt.binding("candidate").unwrap_or_default();
            let score = match world.quality {
                QualityModel::Fixed { score } => score,
                QualityModel::Uniform { lo, hi } => lo + (hi - lo) * KeyedRng::new(1, candidate, 0).next_f64(),
            };
            format!("The rewrite keeps the original setting.\nSCORE: {score:.3}")
        })
    }

    /// Pairwise difficulty judge: the first problem is declared harder with
    /// probability `1 / (1 + exp(theta_2 - theta_1))`.
    pub fn battle_judge(self: &Arc<Self>, id: impl Into<String>) -> ScriptedMock {
        let world = Arc::clone(self);
        ScriptedMock::new(id, [Role::Judge], move |prompt, key| {
            let t1 = world.theta(prompt.binding("problem_1").unwrap_or_default());
            let t2 = world.theta(prompt.binding("problem_2").unwrap_or_default());
            let mut rng = KeyedRng::new(key.seed, &key.item, key.index);
            let verdict = if rng.bernoulli(world.tie_rate) {
                "TIE"
            } else if rng.bernoulli(1.0 / (1.0 + (t2 - t1).exp())) {
                "FIRST"
            } else {
                "SECOND"
            };
            format!("Comparing the reasoning depth of both problems.\nWINNER: {verdict}")
        })
    }
}
