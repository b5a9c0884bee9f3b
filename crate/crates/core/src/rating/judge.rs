use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{BattleRecord, Outcome, RatingError, ScheduledBattle, Side};
use crate::dataset::Sample;
use crate::gateway::{render_prompt, CallKey, ModelBackend, TemplateId};

/// What the judge sees of an item.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatingItem {
    pub id: String,
    pub question: String,
    pub image_ref: String,
}

impl From<&Sample> for RatingItem {
    fn from(s: &Sample) -> Self {
        Self { id: s.id.clone(), question: s.question.clone(), image_ref: s.image_ref.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Winner {
    First,
    Second,
    Tie,
}

/// The last well-formed `WINNER: FIRST|SECOND|TIE` in `text`.
pub fn parse_winner(text: &str) -> Option<Winner> {
    text.rmatch_indices("WINNER:").find_map(|(pos, m)| {
        let rest = text[pos + m.len()..].trim_start().trim_start_matches(['*', '"', '\'']);
        [("FIRST", Winner::First), ("SECOND", Winner::Second), ("TIE", Winner::Tie)]
            .into_iter()
            .find(|(token, _)| rest.starts_with(token))
            .map(|(_, w)| w)
    })
}

fn decode(winner: Winner, presented_first: Side) -> Outcome {
    match (winner, presented_first) {
        (Winner::Tie, _) => Outcome::Tie,
        (Winner::First, Side::A) | (Winner::Second, Side::B) => Outcome::AWins,
        (Winner::First, Side::B) | (Winner::Second, Side::A) => Outcome::BWins,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Judgement {
    Decided(BattleRecord),
    /// No winner token after every retry; left out of the fit.
    Dropped { battle: ScheduledBattle, judge_raw: String },
}

/// Asks the judge which item is harder, retrying up to `retries` extra times
/// when the reply carries no winner token. `index` is the battle's position
/// in the schedule and keys the call.
pub fn judge_battle(
    judge: &dyn ModelBackend,
    battle: &ScheduledBattle,
    items: &HashMap<&str, &RatingItem>,
    seed: u64,
    index: usize,
    retries: u32,
) -> Result<Judgement, RatingError> {
    let get = |id: &str| items.get(id).copied().ok_or_else(|| RatingError::UnknownItem(id.to_string()));
    let (a, b) = (get(&battle.item_a)?, get(&battle.item_b)?);
    let (first, second) = match battle.presented_first {
        Side::A => (a, b),
        Side::B => (b, a),
    };
    let bindings = BTreeMap::from([
        ("problem_1".to_string(), first.question.clone()),
        ("problem_2".to_string(), second.question.clone()),
    ]);
    let prompt = render_prompt(TemplateId::Difficulty.as_str(), &bindings)?
        .with_images([first.image_ref.clone(), second.image_ref.clone()]);
    let item = format!("battle{index}:{}|{}", battle.item_a, battle.item_b);
    let mut raw = String::new();
    for attempt in 0..=retries {
        raw = judge.generate(&prompt, &CallKey::new(seed, item.clone(), attempt.into()))?.text;
        if let Some(w) = parse_winner(&raw) {
            return Ok(Judgement::Decided(BattleRecord {
                item_a: battle.item_a.clone(),
                item_b: battle.item_b.clone(),
                outcome: decode(w, battle.presented_first),
                presented_first: battle.presented_first,
                judge_raw: raw,
            }));
        }
    }
    Ok(Judgement::Dropped { battle: battle.clone(), judge_raw: raw })
}

/// Judges the whole schedule concurrently; results keep schedule order.
pub fn judge_all(
    judge: &dyn ModelBackend,
    schedule: &[ScheduledBattle],
    items: &[RatingItem],
    seed: u64,
    retries: u32,
) -> Result<Vec<Judgement>, RatingError> {
    let map: HashMap<&str, &RatingItem> = items.iter().map(|i| (i.id.as_str(), i)).collect();
    schedule.par_iter().enumerate().map(|(i, b)| judge_battle(judge, b, &map, seed, i, retries)).collect()
}
