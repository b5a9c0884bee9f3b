//! Difficulty-verified synthesis of harder training questions for
//! reinforcement learning with verifiable rewards.
//!
//! The pipeline measures how often a target model solves each seed question
//! (Monte Carlo pass counts), keeps the reliably-solved ones, asks a
//! synthesizer model for a harder rewrite that keeps the original answer, and
//! accepts a rewrite only when the target model still solves it often enough
//! while solving it measurably less often than the original.
//!
//! Item difficulty can also be rated independently through pairwise judge
//! comparisons fitted with a Bradley-Terry model and reported on an Elo scale
//! with bootstrap confidence intervals.

pub mod dataset;
pub mod gateway;
pub mod keyed;
pub mod plot;
pub mod rating;
pub mod reward;
pub mod rollout;
pub mod selector;
pub mod synth;

pub use dataset::{Dataset, Origin, Sample};
pub use gateway::{CallKey, Completion, ModelBackend, Prompt, Role};
pub use rating::{BattleRecord, RatingConfig, RatingResult, Tier};
pub use rollout::{MatchPolicy, RolloutResult};
pub use selector::SelectionConfig;
pub use synth::{CandidateRecord, PipelineConfig, Verdict};
