use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::rollout::{MatchPolicy, DEFAULT_ROLLOUTS};
use crate::selector::SelectionConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Minimum candidate pass count (answerability).
    pub t_min: u32,
    /// Minimum drop in pass count relative to the seed (difficulty).
    pub delta_hard: u32,
    /// Quality-gate threshold in `[0, 1]`; 0 disables the gate.
    pub t_quality: f64,
    pub n_attempts: u32,
    pub n_rollouts: u32,
    /// Extra judge calls when a quality reply cannot be parsed.
    pub quality_retries: u32,
    pub select: SelectionConfig,
    #[serde(rename = "match")]
    pub match_policy: MatchPolicy,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            t_min: 4,
            delta_hard: 2,
            t_quality: 0.5,
            n_attempts: 3,
            n_rollouts: DEFAULT_ROLLOUTS,
            quality_retries: 2,
            select: SelectionConfig::default(),
            match_policy: MatchPolicy::default(),
        }
    }
}

impl PipelineConfig {
    pub fn quality_gate_enabled(&self) -> bool {
        self.t_quality > 0.0
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |msg: String| Err(SynthError::Config(msg));
        if self.t_min < 1 {
            return fail("t_min must be at least 1".into());
        }
        if self.delta_hard < 1 {
            return fail("delta_hard must be at least 1".into());
        }
        if self.n_attempts < 1 {
            return fail("n_attempts must be at least 1".into());
        }
        if self.t_min + self.delta_hard > self.n_rollouts {
            return fail(format!(
                "t_min + delta_hard = {} exceeds n_rollouts = {}; no candidate could ever be accepted",
                self.t_min + self.delta_hard,
                self.n_rollouts
            ));
        }
        if !(0.0..=1.0).contains(&self.t_quality) {
            return fail(format!("t_quality must lie in [0, 1], got {}", self.t_quality));
        }
        if self.select.n_rollouts != self.n_rollouts {
            return fail(format!(
                "select.n_rollouts = {} differs from n_rollouts = {}",
                self.select.n_rollouts, self.n_rollouts
            ));
        }
        self.select.validate().map_err(|e| SynthError::Config(e.to_string()))?;
        if self.match_policy.numeric_tolerance < 0.0 {
            return fail("match.numeric_tolerance must be non-negative".into());
        }
        Ok(())
    }
}
