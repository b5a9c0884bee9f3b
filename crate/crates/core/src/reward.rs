//! Reference arithmetic for verifiable rewards and group-relative
//! advantages. No training happens here.

use crate::rollout::{match_answer, MatchPolicy};

/// 1 when `pred` matches `gold` under `policy`, else 0.
pub fn verifiable_reward(pred: &str, gold: &str, policy: &MatchPolicy) -> u8 {
    u8::from(match_answer(pred, gold, policy))
}

/// `(r_i - mean) / std` with the population standard deviation of the group.
/// A group with zero spread (all right or all wrong) gets zero advantages.
pub fn normalize_advantages(rewards: &[f64]) -> Vec<f64> {
    if rewards.is_empty() {
        return Vec::new();
    }
    let n = rewards.len() as f64;
    let mean = rewards.iter().sum::<f64>() / n;
    let var = rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std == 0.0 {
        return vec![0.0; rewards.len()];
    }
    rewards.iter().map(|r| (r - mean) / std).collect()
}

/// Clipped surrogate term `min(s * A, clip(s, 1 - eps, 1 + eps) * A)`.
pub fn grpo_clip_term(ratio: f64, advantage: f64, eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps);
    (ratio * advantage).min(clipped * advantage)
}
