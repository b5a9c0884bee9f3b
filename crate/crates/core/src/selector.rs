//! Picks seed questions the target model already solves reliably.
//!
//! Pass counts pile up near 0 and near N; both ends carry little gradient
//! signal during training. The selector keeps the high end, which is the
//! band the synthesizer turns into harder variants. The threshold is
//! configurable rather than fixed.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rollout::{RolloutResult, DEFAULT_ROLLOUTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelectionConfig {
    pub min_pass_for_selection: u32,
    pub n_rollouts: u32,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        Self { min_pass_for_selection: 12, n_rollouts: DEFAULT_ROLLOUTS }
    }
}

impl SelectionConfig {
    pub fn validate(&self) -> Result<(), SelectionError> {
        if self.n_rollouts == 0 || self.min_pass_for_selection > self.n_rollouts {
            return Err(SelectionError::InvalidThreshold(*self));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("selection threshold must lie in 0..=n_rollouts: {0:?}")]
    InvalidThreshold(SelectionConfig),
    #[error("rollout for `{id}` used n={found}, expected n={expected}")]
    MixedRolloutCounts { id: String, expected: u32, found: u32 },
}

/// Ids with `pass_count >= min_pass_for_selection`, in input order.
pub fn select_seeds(rollouts: &[RolloutResult], cfg: &SelectionConfig) -> Result<Vec<String>, SelectionError> {
    cfg.validate()?;
    if let Some(r) = rollouts.iter().find(|r| r.n_rollouts != cfg.n_rollouts) {
        return Err(SelectionError::MixedRolloutCounts { id: r.sample_id.clone(), expected: cfg.n_rollouts, found: r.n_rollouts });
    }
    Ok(rollouts.iter().filter(|r| r.pass_count >= cfg.min_pass_for_selection).map(|r| r.sample_id.clone()).collect())
}

/// Frequency of each pass count in `0..=n`. Counts above `n` (from results
/// with a larger rollout budget) extend the table.
pub fn pass_histogram(rollouts: &[RolloutResult], n: u32) -> Vec<usize> {
    let top = rollouts.iter().map(|r| r.pass_count).max().unwrap_or(0).max(n);
    let mut hist = vec![0usize; top as usize + 1];
    for r in rollouts {
        hist[r.pass_count as usize] += 1;
    }
    hist
}

/// Record of a selection run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionManifest {
    pub config: SelectionConfig,
    pub considered: usize,
    pub selected: Vec<String>,
}
