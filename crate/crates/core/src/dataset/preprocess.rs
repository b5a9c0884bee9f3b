use serde::{Deserialize, Serialize};

use super::{Dataset, DatasetError, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessRules {
    /// Rewrite multiple-choice samples (those carrying an `options` map in
    /// `meta`) so the answer is the chosen option's content.
    pub mcq_to_freeform: bool,
    /// Drop samples whose answer is a bare yes/no.
    pub drop_yes_no: bool,
}

impl Default for PreprocessRules {
    fn default() -> Self {
        Self { mcq_to_freeform: true, drop_yes_no: true }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct PreprocessReport {
    pub input: usize,
    pub converted_mcq: usize,
    pub removed_yes_no: usize,
    pub output: usize,
}

/// Applies the configured rules, returning the cleaned dataset and counts.
///
/// Conversion runs before yes/no filtering, so a multiple-choice item whose
/// selected option reads "Yes" is dropped as well.
pub fn preprocess(dataset: &Dataset, rules: PreprocessRules) -> Result<(Dataset, PreprocessReport), DatasetError> {
    let mut report = PreprocessReport { input: dataset.len(), ..Default::default() };
    let mut failed = Vec::new();
    let mut out = Vec::with_capacity(dataset.len());

    for sample in dataset.samples() {
        let mut sample = sample.clone();
        if rules.mcq_to_freeform && sample.meta.contains_key("options") {
            match convert_mcq(&mut sample) {
                Some(()) => report.converted_mcq += 1,
                None => {
                    failed.push(sample.id.clone());
                    continue;
                }
            }
        }
        if rules.drop_yes_no && is_yes_no(&sample.answer) {
            report.removed_yes_no += 1;
            continue;
        }
        out.push(sample);
    }

    if !failed.is_empty() {
        return Err(DatasetError::McqConversion(failed));
    }
    report.output = out.len();
    Ok((Dataset::new(dataset.name.clone(), out)?, report))
}

/// Case-insensitive yes/no after trimming whitespace and punctuation.
pub(crate) fn is_yes_no(answer: &str) -> bool {
    let core = answer.trim_matches(|c: char| c.is_whitespace() || c.is_ascii_punctuation());
    core.eq_ignore_ascii_case("yes") || core.eq_ignore_ascii_case("no")
}

fn option_letter(answer: &str) -> Option<String> {
    let core = answer.trim_matches(|c: char| c.is_whitespace() || matches!(c, '(' | ')' | '.' | ':' | '[' | ']'));
    let mut chars = core.chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if c.is_ascii_alphabetic() => Some(c.to_ascii_uppercase().to_string()),
        _ => None,
    }
}

fn convert_mcq(sample: &mut Sample) -> Option<()> {
    let options = sample.meta.get("options")?.as_object()?;
    let letter = option_letter(&sample.answer)?;
    let content = options
        .iter()
        .find(|(k, _)| k.trim().eq_ignore_ascii_case(&letter))
        .and_then(|(_, v)| match v {
            serde_json::Value::String(s) => Some(s.trim().to_string()),
            serde_json::Value::Number(n) => Some(n.to_string()),
            _ => None,
        })?;
    if content.is_empty() {
        return None;
    }
    let letters: Vec<String> = options.keys().map(|k| k.trim().to_ascii_uppercase()).collect();
    sample.question = strip_option_lines(&sample.question, &letters);
    sample.answer = content;
    sample.meta.remove("options");
    Some(())
}

/// Removes lines such as `A: 3`, `A. 3`, `(A) 3`, `A) 3` and a trailing
/// `Choices:`/`Options:` header.
fn strip_option_lines(question: &str, letters: &[String]) -> String {
    let is_option_line = |line: &str| {
        let t = line.trim_start();
        let t = t.strip_prefix('(').unwrap_or(t);
        letters.iter().any(|l| {
            t.len() > l.len()
                && t[..l.len()].eq_ignore_ascii_case(l)
                && matches!(t.as_bytes()[l.len()], b':' | b'.' | b')')
        })
    };
    let is_header = |line: &str| {
        let t = line.trim().trim_end_matches(':').to_ascii_lowercase();
        t == "choices" || t == "options"
    };
    let kept: Vec<&str> = question.lines().filter(|l| !is_option_line(l)).collect();
    let mut end = kept.len();
    while end > 0 && (kept[end - 1].trim().is_empty() || is_header(kept[end - 1])) {
        end -= 1;
    }
    kept[..end].join("\n").trim().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn mcq(id: &str, answer: &str) -> Sample {
        let mut s = Sample::seed(id, "img.png", "How many sides?\nChoices:\nA: 3\nB: 5", answer);
        s.meta.insert("options".into(), json!({"A": "3", "B": "5"}));
        s
    }

    #[test]
    fn yes_no_detection() {
        for a in ["Yes", "no", " YES. ", "No!", "(yes)"] {
            assert!(is_yes_no(a), "{a}");
        }
        for a in ["Yesterday", "none", "3", "not sure"] {
            assert!(!is_yes_no(a), "{a}");
        }
    }

    #[test]
    fn yes_answer_removed() {
        let d = Dataset::new("d", vec![Sample::seed("a", "i", "Is it red?", "Yes"), Sample::seed("b", "i", "q", "4")]).unwrap();
        let (out, report) = preprocess(&d, PreprocessRules::default()).unwrap();
        assert_eq!(out.ids().collect::<Vec<_>>(), ["b"]);
        assert_eq!(report.removed_yes_no, 1);
        assert_eq!(report.output, 1);
    }

    #[test]
    fn mcq_rewritten_to_option_content() {
        let d = Dataset::new("d", vec![mcq("m", "B")]).unwrap();
        let (out, report) = preprocess(&d, PreprocessRules::default()).unwrap();
        let s = &out.samples()[0];
        assert_eq!(s.answer, "5");
        assert_eq!(s.question, "How many sides?");
        assert!(!s.meta.contains_key("options"));
        assert_eq!(report.converted_mcq, 1);
    }

    #[test]
    fn unresolvable_letter_lists_ids() {
        let d = Dataset::new("d", vec![mcq("m1", "C"), mcq("m2", "B"), mcq("m3", "seven")]).unwrap();
        match preprocess(&d, PreprocessRules::default()) {
            Err(DatasetError::McqConversion(ids)) => assert_eq!(ids, ["m1", "m3"]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn flags_disable_rules() {
        let d = Dataset::new("d", vec![Sample::seed("a", "i", "q", "no"), mcq("m", "B")]).unwrap();
        let rules = PreprocessRules { mcq_to_freeform: false, drop_yes_no: false };
        let (out, _) = preprocess(&d, rules).unwrap();
        assert_eq!(out, d);
    }

    #[test]
    fn seed_corpus_count() {
        // 8,099 items of which 27 have yes/no answers.
        let samples = (0..8099)
            .map(|i| {
                let answer = if i % 300 == 7 { "Yes".to_string() } else { format!("{i}") };
                Sample::seed(format!("s{i}"), "i", "q", answer)
            })
            .collect::<Vec<_>>();
        let d = Dataset::new("mmk", samples).unwrap();
        let (out, report) = preprocess(&d, PreprocessRules::default()).unwrap();
        assert_eq!(report.removed_yes_no, 27);
        assert_eq!(out.len(), 8072);
    }
}
