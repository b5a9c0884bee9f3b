use std::collections::{HashMap, HashSet};

use super::{Dataset, DatasetError, Origin, Sample};

fn check_parents(seed: &Dataset, synth: &Dataset) -> Result<(), DatasetError> {
    let seed_ids: HashSet<&str> = seed.ids().collect();
    let dangling: Vec<String> = synth
        .samples()
        .iter()
        .filter(|s| s.origin != Origin::Synthesized || !s.parent_id.as_deref().is_some_and(|p| seed_ids.contains(p)))
        .map(|s| s.id.clone())
        .collect();
    if dangling.is_empty() {
        Ok(())
    } else {
        Err(DatasetError::DanglingParent(dangling))
    }
}

/// All seed samples followed by all synthesized samples.
pub fn combine_augment(seed: &Dataset, synth: &Dataset) -> Result<Dataset, DatasetError> {
    check_parents(seed, synth)?;
    let samples: Vec<Sample> = seed.samples().iter().chain(synth.samples()).cloned().collect();
    Dataset::new(format!("{}+{}", seed.name, synth.name), samples)
}

/// Each seed sample with a synthesized child is swapped for that child in
/// place; the output has exactly as many samples as `seed`.
pub fn combine_replace(seed: &Dataset, synth: &Dataset) -> Result<Dataset, DatasetError> {
    check_parents(seed, synth)?;
    let mut children: HashMap<&str, &Sample> = HashMap::with_capacity(synth.len());
    let mut shared = Vec::new();
    for s in synth.samples() {
        let parent = s.parent_id.as_deref().expect("checked above");
        if children.insert(parent, s).is_some() && !shared.contains(&parent.to_string()) {
            shared.push(parent.to_string());
        }
    }
    if !shared.is_empty() {
        return Err(DatasetError::AmbiguousReplacement(shared));
    }
    let samples = seed
        .samples()
        .iter()
        .map(|s| children.get(s.id.as_str()).map_or_else(|| s.clone(), |c| (*c).clone()))
        .collect();
    Dataset::new(format!("{}~{}", seed.name, synth.name), samples)
}
