//! Item difficulty from pairwise judge comparisons.
//!
//! Items are paired by [`schedule_battles`], judged, and fitted with a
//! Bradley-Terry model in which `theta` is log-difficulty: the first item of
//! a pair is judged harder with probability `sigmoid(theta_a - theta_b)`.
//! Ratings are reported on an Elo-like scale with bootstrap intervals.

mod bootstrap;
mod fit;
mod judge;
mod schedule;

use std::collections::BTreeMap;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use bootstrap::{bootstrap_ratings, percentile};
pub use fit::{components, fit_bt, log_likelihood, BtFit};
pub use judge::{judge_all, judge_battle, parse_winner, Judgement, RatingItem, Winner};
pub use schedule::{schedule_battles, ScheduledBattle};

use crate::gateway::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    AWins,
    BWins,
    Tie,
}

/// Which item of a battle was shown first to the judge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    A,
    B,
}

/// One judged comparison. "Wins" means "judged harder".
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BattleRecord {
    pub item_a: String,
    pub item_b: String,
    pub outcome: Outcome,
    pub presented_first: Side,
    pub judge_raw: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RatingConfig {
    pub k_opponents: usize,
    pub elo_scale: f64,
    pub elo_base: f64,
    pub elo_anchor: f64,
    pub l2_lambda: f64,
    pub bootstrap_rounds: usize,
    pub tier_hard_min: f64,
    pub tier_easy_max: f64,
    /// Extra judge calls when a reply has no winner token.
    pub judge_retries: u32,
}

impl Default for RatingConfig {
    fn default() -> Self {
        Self {
            k_opponents: 128,
            elo_scale: 400.0,
            elo_base: 10.0,
            elo_anchor: 1000.0,
            l2_lambda: 1e-4,
            bootstrap_rounds: 100,
            tier_hard_min: 1050.0,
            tier_easy_max: 950.0,
            judge_retries: 2,
        }
    }
}

impl RatingConfig {
    pub fn validate(&self) -> Result<(), RatingError> {
        let bad = |m: String| Err(RatingError::Config(m));
        if !(self.elo_base > 1.0) {
            return bad(format!("elo_base must exceed 1, got {}", self.elo_base));
        }
        if !(self.elo_scale > 0.0) {
            return bad(format!("elo_scale must be positive, got {}", self.elo_scale));
        }
        if !(self.l2_lambda > 0.0) {
            return bad(format!("l2_lambda must be positive, got {}", self.l2_lambda));
        }
        if !(self.tier_easy_max < self.tier_hard_min) {
            return bad(format!("tier_easy_max {} must be below tier_hard_min {}", self.tier_easy_max, self.tier_hard_min));
        }
        if self.bootstrap_rounds == 0 {
            return bad("bootstrap_rounds must be at least 1".into());
        }
        if self.k_opponents == 0 {
            return bad("k_opponents must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Easy,
    Medium,
    Hard,
}

impl Tier {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Easy => "easy",
            Self::Medium => "medium",
            Self::Hard => "hard",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingResult {
    pub item_id: String,
    pub theta: f64,
    pub elo_median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub tier: Tier,
}

#[derive(Debug, Error)]
pub enum RatingError {
    #[error("invalid rating configuration: {0}")]
    Config(String),
    #[error("comparison graph is disconnected ({} components): {}", .0.len(), fmt_components(.0))]
    Disconnected(Vec<Vec<String>>),
    #[error("battle references unknown item `{0}`")]
    UnknownItem(String),
    #[error("battle pits `{0}` against itself")]
    SelfBattle(String),
    #[error("Bradley-Terry fit did not converge after {iterations} iterations (max |gradient| {grad_norm:e})")]
    NonConvergence { iterations: usize, grad_norm: f64 },
    #[error("every bootstrap round failed")]
    AllRoundsFailed,
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn fmt_components(components: &[Vec<String>]) -> String {
    components.iter().map(|c| format!("{{{}}}", c.join(", "))).collect::<Vec<_>>().join(" ")
}

/// `sigmoid(theta_i - theta_j)`. The negative branch is computed as the
/// complement of the positive one so that `p(x, y) + p(y, x) == 1` exactly.
pub fn bt_win_prob(theta_i: f64, theta_j: f64) -> f64 {
    let d = theta_i - theta_j;
    if d >= 0.0 {
        1.0 / (1.0 + (-d).exp())
    } else {
        1.0 - 1.0 / (1.0 + d.exp())
    }
}

/// `ln sigmoid(x)` without overflow.
pub(crate) fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

pub fn theta_to_elo(theta: f64, cfg: &RatingConfig) -> f64 {
    cfg.elo_scale / cfg.elo_base.ln() * theta + cfg.elo_anchor
}

pub fn categorize(elo: f64, cfg: &RatingConfig) -> Tier {
    if elo >= cfg.tier_hard_min {
        Tier::Hard
    } else if elo <= cfg.tier_easy_max {
        Tier::Easy
    } else {
        Tier::Medium
    }
}

/// Copies each representative's rating to the members of its group.
/// `groups` maps member id to representative id; members without a rated
/// representative are skipped.
pub fn propagate_groups(results: &[RatingResult], groups: &BTreeMap<String, String>) -> Vec<RatingResult> {
    let by_id: BTreeMap<&str, &RatingResult> = results.iter().map(|r| (r.item_id.as_str(), r)).collect();
    let mut out = results.to_vec();
    for (member, rep) in groups {
        if member == rep || by_id.contains_key(member.as_str()) {
            continue;
        }
        if let Some(r) = by_id.get(rep.as_str()) {
            out.push(RatingResult { item_id: member.clone(), ..(*r).clone() });
        }
    }
    out
}

pub fn write_ratings_csv(writer: impl io::Write, results: &[RatingResult]) -> Result<(), RatingError> {
    let mut w = csv::Writer::from_writer(writer);
    for r in results {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_ratings_csv(reader: impl io::Read) -> Result<Vec<RatingResult>, RatingError> {
    let mut r = csv::Reader::from_reader(reader);
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// Item count per tier.
pub fn tier_summary(results: &[RatingResult]) -> BTreeMap<Tier, usize> {
    let mut out: BTreeMap<Tier, usize> = [Tier::Easy, Tier::Medium, Tier::Hard].into_iter().map(|t| (t, 0)).collect();
    for r in results {
        *out.entry(r.tier).or_default() += 1;
    }
    out
}
