//! Monte Carlo pass counts: how many of `n` sampled responses reach the
//! reference answer.

mod answer;
mod cache;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use answer::{extract_answer, match_answer, ExtractError, MatchPolicy};
pub use cache::{RolloutCache, RolloutKey};

use crate::dataset::Sample;
use crate::gateway::{render_prompt, CallKey, GatewayError, ModelBackend, TemplateId};

/// Default number of rollouts per question.
pub const DEFAULT_ROLLOUTS: u32 = 16;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolloutRecord {
    pub index: u32,
    pub raw_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extracted_answer: Option<String>,
    pub matched: bool,
}

/// Pass count of one question under one backend.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolloutResult {
    pub sample_id: String,
    pub backend_id: String,
    pub n_rollouts: u32,
    pub pass_count: u32,
    pub per_rollout: Vec<RolloutRecord>,
    pub rng_seed: u64,
}

impl RolloutResult {
    pub fn key(&self) -> RolloutKey {
        RolloutKey::new(&self.sample_id, &self.backend_id, self.n_rollouts, self.rng_seed)
    }

    /// Checks the count/record invariants (used when loading caches).
    pub fn is_consistent(&self) -> bool {
        self.per_rollout.len() == self.n_rollouts as usize
            && self.per_rollout.iter().filter(|r| r.matched).count() == self.pass_count as usize
            && self.per_rollout.iter().enumerate().all(|(i, r)| r.index as usize == i)
    }
}

#[derive(Debug, Error)]
pub enum RolloutError {
    #[error("n_rollouts must be at least 1")]
    ZeroRollouts,
    #[error("rollouts for `{subject}` failed after {} of {n} completed: {source}", .completed.len())]
    PartialFailure {
        subject: String,
        n: u32,
        completed: Vec<RolloutRecord>,
        #[source]
        source: GatewayError,
    },
    #[error(transparent)]
    Prompt(GatewayError),
}

impl RolloutError {
    pub fn is_transport(&self) -> bool {
        matches!(self, Self::PartialFailure { source, .. } if source.is_transport())
    }
}

/// What is being rolled out: an id for keying randomness and caching, plus
/// the question/image/answer triplet.
#[derive(Debug, Clone, Copy)]
pub struct Subject<'a> {
    pub id: &'a str,
    pub image_ref: &'a str,
    pub question: &'a str,
    pub answer: &'a str,
}

impl<'a> From<&'a Sample> for Subject<'a> {
    fn from(s: &'a Sample) -> Self {
        Self { id: &s.id, image_ref: &s.image_ref, question: &s.question, answer: &s.answer }
    }
}

fn score(index: u32, raw_text: String, gold: &str, policy: &MatchPolicy) -> RolloutRecord {
    // extraction failures count as a miss, never as an error
    let extracted_answer = extract_answer(&raw_text).ok().flatten();
    let matched = extracted_answer.as_deref().is_some_and(|pred| match_answer(pred, gold, policy));
    RolloutRecord { index, raw_text, extracted_answer, matched }
}

/// Issues `n` generations of the reasoning prompt for `subject` and counts
/// the ones whose last boxed answer matches. Rollout `j` uses call key
/// `(seed, subject.id, j)`; results are merged by index, so the outcome does
/// not depend on execution order.
pub fn pass_count_for(
    subject: Subject<'_>,
    backend: &dyn ModelBackend,
    n: u32,
    seed: u64,
    policy: &MatchPolicy,
) -> Result<RolloutResult, RolloutError> {
    if n == 0 {
        return Err(RolloutError::ZeroRollouts);
    }
    let bindings = BTreeMap::from([("question".to_string(), subject.question.to_string())]);
    let prompt = render_prompt(TemplateId::Reasoning.as_str(), &bindings)
        .map_err(RolloutError::Prompt)?
        .with_images([subject.image_ref.to_string()]);

    let outcomes: Vec<Result<RolloutRecord, GatewayError>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let key = CallKey::new(seed, subject.id, u64::from(j));
            backend.generate(&prompt, &key).map(|c| score(j, c.text, subject.answer, policy))
        })
        .collect();

    let mut per_rollout = Vec::with_capacity(n as usize);
    let mut failure = None;
    for outcome in outcomes {
        match outcome {
            Ok(record) => per_rollout.push(record),
            Err(e) if failure.is_none() => failure = Some(e),
            Err(_) => {}
        }
    }
    if let Some(source) = failure {
        return Err(RolloutError::PartialFailure { subject: subject.id.to_string(), n, completed: per_rollout, source });
    }
    let pass_count = per_rollout.iter().filter(|r| r.matched).count() as u32;
    Ok(RolloutResult {
        sample_id: subject.id.to_string(),
        backend_id: backend.backend_id().to_string(),
        n_rollouts: n,
        pass_count,
        per_rollout,
        rng_seed: seed,
    })
}

pub fn pass_count(
    sample: &Sample,
    backend: &dyn ModelBackend,
    n: u32,
    seed: u64,
    policy: &MatchPolicy,
) -> Result<RolloutResult, RolloutError> {
    pass_count_for(sample.into(), backend, n, seed, policy)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Role, ScriptedMock, SimulatedWorld};
    use std::sync::Arc;

    fn world(p: f64) -> (Sample, ScriptedMock) {
        let s = Sample::seed("s1", "img.png", "How many?", "12");
        let mut w = SimulatedWorld::default();
        w.add_question("How many?", "12", p, 0.0);
        (s, Arc::new(w).solver("sim"))
    }

    #[test]
    fn certain_and_impossible() {
        let policy = MatchPolicy::default();
        let (s, b) = world(1.0);
        assert_eq!(pass_count(&s, &b, 16, 0, &policy).unwrap().pass_count, 16);
        let (s, b) = world(0.0);
        let r = pass_count(&s, &b, 16, 0, &policy).unwrap();
        assert_eq!(r.pass_count, 0);
        assert!(r.per_rollout.iter().all(|x| x.extracted_answer.is_some()));
    }

    #[test]
    fn invariants_hold() {
        let (s, b) = world(0.5);
        let r = pass_count(&s, &b, 16, 3, &MatchPolicy::default()).unwrap();
        assert!(r.is_consistent());
        assert_eq!(r.key(), RolloutKey::new("s1", "sim", 16, 3));
    }

    #[test]
    fn zero_rollouts_rejected() {
        let (s, b) = world(0.5);
        assert!(matches!(pass_count(&s, &b, 0, 0, &MatchPolicy::default()), Err(RolloutError::ZeroRollouts)));
    }

    #[test]
    fn unboxed_or_unbalanced_is_a_miss() {
        let s = Sample::seed("s", "i", "q", "1");
        let b = ScriptedMock::cycle("m", [Role::Target], vec![r"\boxed{1".into(), "1".into(), r"\boxed{1}".into()]);
        let r = pass_count(&s, &b, 3, 0, &MatchPolicy::default()).unwrap();
        assert_eq!(r.pass_count, 1);
        assert!(r.per_rollout[2].matched);
    }

    #[test]
    fn failure_keeps_completed_rollouts() {
        struct Flaky;
        impl ModelBackend for Flaky {
            fn backend_id(&self) -> &str {
                "flaky"
            }
            fn roles(&self) -> &[Role] {
                &[Role::Target]
            }
            fn transport(&self) -> crate::gateway::Transport {
                crate::gateway::Transport::RemoteHttp
            }
            fn generate(&self, _: &crate::gateway::Prompt, key: &CallKey) -> Result<crate::gateway::Completion, GatewayError> {
                if key.index == 5 {
                    return Err(GatewayError::Exhausted { backend: "flaky".into(), attempts: 3, message: "down".into() });
                }
                Ok(crate::gateway::Completion {
                    text: r"\boxed{1}".into(),
                    finish_reason: crate::gateway::FinishReason::Stop,
                    usage: Default::default(),
                    latency_ms: 1,
                })
            }
        }
        let s = Sample::seed("s", "i", "q", "1");
        match pass_count(&s, &Flaky, 8, 0, &MatchPolicy::default()) {
            Err(e @ RolloutError::PartialFailure { .. }) => {
                assert!(e.is_transport());
                let RolloutError::PartialFailure { completed, .. } = e else { unreachable!() };
                assert_eq!(completed.len(), 7);
                assert!(completed.iter().all(|r| r.index != 5));
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
