use serde::{Deserialize, Serialize};

use super::PipelineConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Accepted,
    RejectedQuality,
    RejectedCorrectness,
    RejectedDifficulty,
    ParseError,
    /// Per-sample outcome when every attempt was rejected. Never written as
    /// an attempt record.
    ExhaustedAttempts,
}

impl Verdict {
    pub const ATTEMPT_VERDICTS: [Verdict; 5] =
        [Self::Accepted, Self::RejectedQuality, Self::RejectedCorrectness, Self::RejectedDifficulty, Self::ParseError];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Accepted => "accepted",
            Self::RejectedQuality => "rejected_quality",
            Self::RejectedCorrectness => "rejected_correctness",
            Self::RejectedDifficulty => "rejected_difficulty",
            Self::ParseError => "parse_error",
            Self::ExhaustedAttempts => "exhausted_attempts",
        }
    }
}

/// Accepts a candidate that is still solved at least `t_min` times and at
/// least `delta_hard` fewer times than its seed. When both checks fail the
/// correctness failure is reported.
pub fn verify_candidate(c_ori: u32, c_cand: u32, cfg: &PipelineConfig) -> Verdict {
    if c_cand < cfg.t_min {
        Verdict::RejectedCorrectness
    } else if u64::from(c_cand) + u64::from(cfg.delta_hard) > u64::from(c_ori) {
        Verdict::RejectedDifficulty
    } else {
        Verdict::Accepted
    }
}
