use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{RatingError, Side};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScheduledBattle {
    /// The anchor item.
    pub item_a: String,
    pub item_b: String,
    pub presented_first: Side,
}

/// Each item anchors `k` battles against distinct opponents drawn without
/// replacement; presentation order is a fair coin per battle. The schedule
/// depends only on `items` (in order), `k` and `rng_seed`.
pub fn schedule_battles(items: &[String], k: usize, rng_seed: u64) -> Result<Vec<ScheduledBattle>, RatingError> {
    let n = items.len();
    if k + 1 > n {
        return Err(RatingError::Config(format!("k_opponents = {k} needs at least {} items, got {n}", k + 1)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut out = Vec::with_capacity(n * k);
    for (i, anchor) in items.iter().enumerate() {
        for o in sample(&mut rng, n - 1, k) {
            let j = if o >= i { o + 1 } else { o };
            let presented_first = if rng.random_bool(0.5) { Side::A } else { Side::B };
            out.push(ScheduledBattle { item_a: anchor.clone(), item_b: items[j].clone(), presented_first });
        }
    }
    Ok(out)
}
