use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::fit::{fit_bt, fit_present, index_battles};
use super::{categorize, theta_to_elo, BattleRecord, RatingConfig, RatingError, RatingResult};
use crate::keyed::derive_seed;

/// Linear-interpolation percentile of sorted data, `q` in `[0, 1]`.
pub fn percentile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "percentile of empty data");
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Fits the full battle set, then refits `cfg.bootstrap_rounds` resamples
/// (battles drawn with replacement). Round `r` draws from a generator seeded
/// by `(rng_seed, r)`, so results do not depend on thread scheduling.
///
/// An item that gets no battles in a round, or any item in a round whose
/// resample is disconnected, has no value for that round; missing values
/// take the minimum rating observed anywhere before the median and the
/// 2.5/97.5 percentiles are taken. Results follow `items` order.
pub fn bootstrap_ratings(
    battles: &[BattleRecord],
    items: &[String],
    cfg: &RatingConfig,
    rng_seed: u64,
) -> Result<Vec<RatingResult>, RatingError> {
    cfg.validate()?;
    let full = fit_bt(battles, items, cfg.l2_lambda)?;
    let indexed = index_battles(battles, items)?;
    let n = items.len();
    let m = indexed.len();

    let rounds: Vec<Option<Vec<Option<f64>>>> = (0..cfg.bootstrap_rounds as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(rng_seed, r));
            let draw: Vec<_> = (0..m).map(|_| &indexed[rng.random_range(0..m)]).collect();
            fit_present(n, draw, cfg.l2_lambda)
                .map(|thetas| thetas.into_iter().map(|t| t.map(|t| theta_to_elo(t, cfg))).collect())
        })
        .collect();

    let floor = rounds.iter().flatten().flatten().flatten().copied().fold(f64::INFINITY, f64::min);
    if !floor.is_finite() {
        return Err(RatingError::AllRoundsFailed);
    }

    Ok(items
        .iter()
        .enumerate()
        .map(|(i, id)| {
            let mut values: Vec<f64> =
                rounds.iter().map(|round| round.as_ref().and_then(|r| r[i]).unwrap_or(floor)).collect();
            values.sort_by(f64::total_cmp);
            let elo_median = percentile(&values, 0.5);
            RatingResult {
                item_id: id.clone(),
                theta: full.theta[id],
                elo_median,
                ci_low: percentile(&values, 0.025),
                ci_high: percentile(&values, 0.975),
                tier: categorize(elo_median, cfg),
            }
        })
        .collect())
}
