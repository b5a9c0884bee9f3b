use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetError};
use crate::rollout::RolloutResult;

/// How reasoning steps are counted inside a response's think span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepHeuristic {
    /// Also split on sentence-final `.`, `!`, `?` (followed by whitespace or
    /// end of text), not only on newlines.
    pub split_sentences: bool,
}

impl Default for StepHeuristic {
    fn default() -> Self {
        Self { split_sentences: true }
    }
}

fn think_span(text: &str) -> &str {
    match (text.find("<think>"), text.find("</think>")) {
        (Some(open), Some(close)) if close > open => &text[open + "<think>".len()..close],
        (Some(open), _) => &text[open + "<think>".len()..],
        (None, Some(close)) => &text[..close],
        (None, None) => text,
    }
}

/// Number of non-empty newline- or sentence-delimited segments in the think
/// span (the whole text when no think tags are present).
pub fn count_reasoning_steps(text: &str, heuristic: StepHeuristic) -> usize {
    let span = think_span(text);
    let mut count = 0;
    let mut current = String::new();
    let mut chars = span.chars().peekable();
    while let Some(c) = chars.next() {
        let boundary = c == '\n'
            || (heuristic.split_sentences
                && matches!(c, '.' | '!' | '?')
                && chars.peek().is_none_or(|n| n.is_whitespace()));
        if boundary {
            if !current.trim().is_empty() {
                count += 1;
            }
            current.clear();
        } else {
            current.push(c);
        }
    }
    if !current.trim().is_empty() {
        count += 1;
    }
    count
}

/// Pass-count distribution summary for one dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub sample_count: usize,
    pub n_rollouts: u32,
    pub mean_pass: f64,
    /// `histogram[c]` is the number of samples with pass count `c`, for
    /// `c` in `0..=n_rollouts`.
    pub histogram: Vec<usize>,
    pub mean_reasoning_steps: f64,
}

impl StatsReport {
    pub fn write_csv(&self, writer: impl Write) -> Result<(), DatasetError> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["pass_count", "frequency"])?;
        for (count, freq) in self.histogram.iter().enumerate() {
            w.write_record([count.to_string(), freq.to_string()])?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }
}

/// Summarises pass counts (and reasoning-step lengths of the recorded
/// responses) for every sample in `dataset`.
pub fn compute_stats(
    dataset: &Dataset,
    rollouts: &HashMap<String, RolloutResult>,
    heuristic: StepHeuristic,
) -> Result<StatsReport, DatasetError> {
    let missing: Vec<String> = dataset.ids().filter(|id| !rollouts.contains_key(*id)).map(String::from).collect();
    if !missing.is_empty() {
        return Err(DatasetError::MissingRollouts(missing));
    }
    let results: Vec<&RolloutResult> = dataset.ids().map(|id| &rollouts[id]).collect();
    let n = results.iter().map(|r| r.n_rollouts).max().unwrap_or(0);
    let mut histogram = vec![0usize; n as usize + 1];
    let mut pass_total = 0u64;
    let mut step_total = 0.0;
    for r in &results {
        histogram[r.pass_count as usize] += 1;
        pass_total += u64::from(r.pass_count);
        if !r.per_rollout.is_empty() {
            let steps: usize = r.per_rollout.iter().map(|x| count_reasoning_steps(&x.raw_text, heuristic)).sum();
            step_total += steps as f64 / r.per_rollout.len() as f64;
        }
    }
    let count = results.len();
    let mean = |total: f64| if count == 0 { 0.0 } else { total / count as f64 };
    Ok(StatsReport {
        sample_count: count,
        n_rollouts: n,
        mean_pass: mean(pass_total as f64),
        histogram,
        mean_reasoning_steps: mean(step_total),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Sample;
    use crate::rollout::RolloutRecord;

    fn result(id: &str, pass: u32, n: u32) -> RolloutResult {
        let per_rollout = (0..n)
            .map(|j| RolloutRecord {
                index: j,
                raw_text: "<think>a.\nb.</think>\\boxed{1}".into(),
                extracted_answer: Some("1".into()),
                matched: j < pass,
            })
            .collect();
        RolloutResult { sample_id: id.into(), backend_id: "m".into(), n_rollouts: n, pass_count: pass, per_rollout, rng_seed: 0 }
    }

    fn setup(counts: &[u32]) -> (Dataset, HashMap<String, RolloutResult>) {
        let ids: Vec<String> = (0..counts.len()).map(|i| format!("s{i}")).collect();
        let d = Dataset::new("d", ids.iter().map(|id| Sample::seed(id.clone(), "i", "q", "1")).collect()).unwrap();
        let r = ids.iter().zip(counts).map(|(id, &c)| (id.clone(), result(id, c, 16))).collect();
        (d, r)
    }

    #[test]
    fn step_examples() {
        let h = StepHeuristic::default();
        assert_eq!(count_reasoning_steps("", h), 0);
        assert_eq!(count_reasoning_steps("<think>Step one.\nStep two.</think>\\boxed{3}", h), 2);
        assert_eq!(count_reasoning_steps("<think>x = 3.5 so y = 7. Done!</think>", h), 2);
        assert_eq!(count_reasoning_steps("<think>One. Two.</think>", StepHeuristic { split_sentences: false }), 1);
        assert_eq!(count_reasoning_steps("no tags\n\nsecond line", h), 2);
    }

    #[test]
    fn arithmetic_mean_and_histogram() {
        let (d, r) = setup(&[4, 8, 12]);
        let s = compute_stats(&d, &r, StepHeuristic::default()).unwrap();
        assert_eq!(s.mean_pass, 8.0);
        assert_eq!(s.histogram.len(), 17);
        assert_eq!((s.histogram[4], s.histogram[8], s.histogram[12]), (1, 1, 1));
        assert_eq!(s.histogram.iter().sum::<usize>(), 3);
        assert_eq!(s.mean_reasoning_steps, 2.0);
    }

    #[test]
    fn single_sample() {
        let (d, r) = setup(&[16]);
        assert_eq!(compute_stats(&d, &r, StepHeuristic::default()).unwrap().mean_pass, 16.0);
    }

    #[test]
    fn missing_rollouts_listed() {
        let (d, mut r) = setup(&[1, 2, 3]);
        r.remove("s1");
        assert!(matches!(compute_stats(&d, &r, StepHeuristic::default()), Err(DatasetError::MissingRollouts(ids)) if ids == ["s1"]));
    }

    #[test]
    fn csv_layout() {
        let (d, r) = setup(&[0, 0, 16]);
        let s = compute_stats(&d, &r, StepHeuristic::default()).unwrap();
        let mut buf = Vec::new();
        s.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "pass_count,frequency");
        assert_eq!(lines[1], "0,2");
        assert_eq!(lines[17], "16,1");
    }
}
