//! Harder-variant synthesis with answerability and difficulty guarantees.
//!
//! Each selected seed gets up to `n_attempts` rewrites. A rewrite is kept
//! only if the verifier policy still reaches the seed's answer at least
//! `t_min` times out of `n_rollouts` and at least `delta_hard` fewer times
//! than it did on the seed. The first rewrite that passes is emitted; every
//! attempt is logged.

mod audit;
mod config;
mod pipeline;
mod verify;

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use audit::{append_audit, load_audit};
pub use config::PipelineConfig;
pub use pipeline::{
    child_id, run_pipeline, synthesize_verified, tally, Pipeline, PipelineError, PipelineEvent, PipelineRun, SampleFailure,
    SynthesisOutcome,
};
pub use verify::{verify_candidate, Verdict};

use crate::dataset::{Origin, Sample};
use crate::gateway::{render_prompt, CallKey, GatewayError, ModelBackend, Role, TemplateId};
use crate::rollout::RolloutError;

/// One synthesis attempt and how it was judged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub parent_id: String,
    pub attempt_index: u32,
    pub candidate_question: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality_score: Option<f64>,
    pub c_ori: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_cand: Option<u32>,
    pub verdict: Verdict,
    pub raw_synth_output: String,
}

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid pipeline configuration: {0}")]
    Config(String),
    #[error("synthesizer reply has no `New Question:` body")]
    MissingMarker { raw: String },
    #[error("judge reply has no `SCORE:` value")]
    UnparseableScore { raw: String },
    #[error("judge score {score} is outside [0, 1]")]
    ScoreOutOfRange { score: f64, raw: String },
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Rollout(#[from] RolloutError),
    /// Raised by pipeline sinks that persist results.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl SynthError {
    pub fn is_transport(&self) -> bool {
        match self {
            Self::Gateway(e) => e.is_transport(),
            Self::Rollout(e) => e.is_transport(),
            _ => false,
        }
    }
}

/// Backends for each role. The verifier defaults to the target policy.
#[derive(Clone)]
pub struct Backends {
    pub target: Arc<dyn ModelBackend>,
    pub verifier: Option<Arc<dyn ModelBackend>>,
    pub synthesizer: Arc<dyn ModelBackend>,
    pub judge: Option<Arc<dyn ModelBackend>>,
}

impl Backends {
    pub fn new(target: Arc<dyn ModelBackend>, synthesizer: Arc<dyn ModelBackend>) -> Self {
        Self { target, verifier: None, synthesizer, judge: None }
    }

    pub fn with_verifier(mut self, verifier: Arc<dyn ModelBackend>) -> Self {
        self.verifier = Some(verifier);
        self
    }

    pub fn with_judge(mut self, judge: Arc<dyn ModelBackend>) -> Self {
        self.judge = Some(judge);
        self
    }

    pub fn verifier(&self) -> &dyn ModelBackend {
        self.verifier.as_deref().unwrap_or(self.target.as_ref())
    }

    pub fn validate(&self, cfg: &PipelineConfig) -> Result<(), SynthError> {
        let need = |b: &dyn ModelBackend, role: Role| {
            if b.has_role(role) {
                Ok(())
            } else {
                Err(SynthError::Config(format!("backend `{}` does not serve the {role:?} role", b.backend_id())))
            }
        };
        need(self.target.as_ref(), Role::Target)?;
        need(self.verifier(), Role::Verifier)?;
        need(self.synthesizer.as_ref(), Role::Synthesizer)?;
        if cfg.quality_gate_enabled() {
            let judge = self.judge.as_deref().ok_or_else(|| SynthError::Config("quality gate enabled but no judge backend".into()))?;
            need(judge, Role::Judge)?;
        }
        Ok(())
    }
}

const NEW_QUESTION: &str = "New Question:";
const ECHOED_SLOT: &str = "{Your transformed question}";

/// Text after the last `New Question:` marker, trimmed.
pub fn parse_new_question(raw: &str) -> Option<String> {
    let (_, body) = raw.rsplit_once(NEW_QUESTION)?;
    let body = body.trim().trim_start_matches('*').trim();
    (!body.is_empty() && body != ECHOED_SLOT).then(|| body.to_string())
}

/// A synthesizer reply: the raw text and, when parseable, the new question.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthReply {
    pub raw: String,
    pub question: Option<String>,
}

/// Asks the synthesizer for a harder rewrite of `sample`. Only the image and
/// the question are sent; the answer is withheld.
pub fn synthesize_candidate(backend: &dyn ModelBackend, sample: &Sample, key: &CallKey) -> Result<SynthReply, SynthError> {
    let bindings = BTreeMap::from([("question".to_string(), sample.question.clone())]);
    let prompt = render_prompt(TemplateId::Synthesizer.as_str(), &bindings)?.with_images([sample.image_ref.clone()]);
    let completion = backend.generate(&prompt, key)?;
    let question = parse_new_question(&completion.text);
    Ok(SynthReply { raw: completion.text, question })
}

/// Parses the last `SCORE: x` in a judge reply.
pub fn parse_score(raw: &str) -> Result<f64, SynthError> {
    let (_, rest) = raw.rsplit_once("SCORE:").ok_or_else(|| SynthError::UnparseableScore { raw: raw.to_string() })?;
    let token: String = rest
        .trim_start()
        .chars()
        .take_while(|c| c.is_ascii_digit() || matches!(c, '.' | '-' | '+' | 'e' | 'E'))
        .collect();
    let score: f64 = token.parse().map_err(|_| SynthError::UnparseableScore { raw: raw.to_string() })?;
    if !(0.0..=1.0).contains(&score) {
        return Err(SynthError::ScoreOutOfRange { score, raw: raw.to_string() });
    }
    Ok(score)
}

/// Asks the judge to rate `candidate` given the original question and answer.
/// Scores outside `[0, 1]` are errors rather than being clamped.
pub fn assess_quality(judge: &dyn ModelBackend, sample: &Sample, candidate: &str, key: &CallKey) -> Result<f64, SynthError> {
    let bindings = BTreeMap::from([
        ("question".to_string(), sample.question.clone()),
        ("answer".to_string(), sample.answer.clone()),
        ("candidate".to_string(), candidate.to_string()),
    ]);
    let prompt = render_prompt(TemplateId::Quality.as_str(), &bindings)?.with_images([sample.image_ref.clone()]);
    let completion = judge.generate(&prompt, key)?;
    parse_score(&completion.text)
}

/// Id given to the synthesized child of `parent_id`.
pub fn synthesized_id(parent_id: &str) -> String {
    format!("{parent_id}-synth")
}

/// Builds the emitted sample for an accepted record. The answer is copied
/// from the parent unchanged.
pub fn synthesized_sample(parent: &Sample, record: &CandidateRecord) -> Sample {
    let mut meta = BTreeMap::new();
    meta.insert("c_ori".to_string(), record.c_ori.into());
    if let Some(c) = record.c_cand {
        meta.insert("c_cand".to_string(), c.into());
    }
    meta.insert("attempt_index".to_string(), record.attempt_index.into());
    Sample {
        id: synthesized_id(&parent.id),
        image_ref: parent.image_ref.clone(),
        question: record.candidate_question.clone(),
        answer: parent.answer.clone(),
        origin: Origin::Synthesized,
        parent_id: Some(parent.id.clone()),
        meta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::ScriptedMock;

    fn sample() -> Sample {
        Sample::seed("s", "img.png", "What is the area?", "12")
    }

    #[test]
    fn parse_examples() {
        assert_eq!(parse_new_question("New Question: What is the area of the shaded part?").as_deref(), Some("What is the area of the shaded part?"));
        assert_eq!(parse_new_question("New Question:  Q2 ").as_deref(), Some("Q2"));
        assert_eq!(parse_new_question("Here you go: Q2"), None);
        assert_eq!(parse_new_question("New Question:   "), None);
        assert_eq!(parse_new_question("New Question: {Your transformed question}"), None);
        assert_eq!(parse_new_question("**New Question:** Q3").as_deref(), Some("Q3"));
    }

    #[test]
    fn synthesizer_never_sees_answer() {
        let seen = Arc::new(std::sync::Mutex::new(String::new()));
        let log = Arc::clone(&seen);
        let m = ScriptedMock::new("syn", [Role::Synthesizer], move |p, _| {
            *log.lock().unwrap() = format!("{}|{:?}", p.text, p.bindings);
            "New Question: harder".into()
        });
        let mut s = sample();
        s.answer = "ANSWER-SENTINEL".into();
        let reply = synthesize_candidate(&m, &s, &CallKey::new(0, "s", 0)).unwrap();
        assert_eq!(reply.question.as_deref(), Some("harder"));
        let seen = seen.lock().unwrap();
        assert!(seen.contains("What is the area?"));
        assert!(!seen.contains("ANSWER-SENTINEL"));
    }

    #[test]
    fn score_parsing() {
        assert_eq!(parse_score("fine\nSCORE: 0.9").unwrap(), 0.9);
        assert!(matches!(parse_score("SCORE: 1.2"), Err(SynthError::ScoreOutOfRange { .. })));
        assert!(matches!(parse_score("SCORE: high"), Err(SynthError::UnparseableScore { .. })));
        assert!(matches!(parse_score("no score"), Err(SynthError::UnparseableScore { .. })));
    }

    #[test]
    fn judge_gets_full_context() {
        let m = ScriptedMock::new("j", [Role::Judge], |p, _| {
            assert_eq!(p.binding("answer"), Some("12"));
            assert_eq!(p.binding("candidate"), Some("cand"));
            assert_eq!(p.image_refs, ["img.png"]);
            "SCORE: 0.9".into()
        });
        assert_eq!(assess_quality(&m, &sample(), "cand", &CallKey::new(0, "s", 0)).unwrap(), 0.9);
    }

    #[test]
    fn emitted_sample_keeps_answer() {
        let parent = sample();
        let rec = CandidateRecord {
            parent_id: "s".into(),
            attempt_index: 1,
            candidate_question: "harder".into(),
            quality_score: Some(0.8),
            c_ori: 15,
            c_cand: Some(6),
            verdict: Verdict::Accepted,
            raw_synth_output: "New Question: harder".into(),
        };
        let child = synthesized_sample(&parent, &rec);
        assert_eq!(child.answer, parent.answer);
        assert_eq!(child.parent_id.as_deref(), Some("s"));
        assert_eq!(child.origin, Origin::Synthesized);
        child.validate().unwrap();
    }
}
