use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use super::{DecodeParams, GatewayError, Prompt};

const SYNTHESIZER: &str = "Given an image and the following question, transform it into a significantly more challenging version that requires deeper reasoning but maintains the same answer.

Original Question:

{question}

Your Response Format:

New Question: {Your transformed question}";

const REASONING_SYSTEM: &str = "You are a helpful assistant.";

const REASONING: &str = r"You FIRST think about the reasoning process as an internal monologue and then provide the final answer.The reasoning process MUST BE enclosed within <think> </think> tags. The final answer MUST BE put in \boxed{}. {question}";

const DIFFICULTY: &str = "Compare math problems based on their difficulty. Consider reasoning steps, domain knowledge needed, and computational complexity in your assessment.

<Image 1>

FIRST PROBLEM:
{problem_1}

<Image 2>

SECOND PROBLEM:
{problem_2}

Which of these two math problems is more difficult?

Provide a brief explanation comparing their difficulty levels, then end with exactly one of:
\"WINNER: FIRST\", \"WINNER: SECOND\", or \"WINNER: TIE\"";

const QUALITY: &str = "You are reviewing a rewritten version of a question about an image.

Original Question:
{question}

Reference Answer:
{answer}

Rewritten Question:
{candidate}

Judge whether the rewritten question is well-posed, unambiguous, consistent with the image, and still answered by the reference answer. Give a short justification, then end with a single line of the form \"SCORE: x\" where x is a number between 0 and 1.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TemplateId {
    /// Rewrites a question into a harder one. Only the question is bound;
    /// the answer is never shown to the synthesizer.
    Synthesizer,
    /// Solver prompt used for every rollout.
    Reasoning,
    /// Pairwise difficulty comparison for the rating judge.
    Difficulty,
    /// Quality gate for synthesized candidates.
    Quality,
}

impl TemplateId {
    pub const ALL: [TemplateId; 4] = [Self::Synthesizer, Self::Reasoning, Self::Difficulty, Self::Quality];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Synthesizer => "synthesizer",
            Self::Reasoning => "reasoning",
            Self::Difficulty => "difficulty",
            Self::Quality => "quality",
        }
    }

    fn system(self) -> Option<&'static str> {
        match self {
            Self::Reasoning => Some(REASONING_SYSTEM),
            _ => None,
        }
    }

    fn decode(self) -> DecodeParams {
        match self {
            Self::Reasoning | Self::Synthesizer => DecodeParams::ROLLOUT,
            Self::Difficulty | Self::Quality => DecodeParams::JUDGE,
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = GatewayError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|t| t.as_str() == s).ok_or_else(|| GatewayError::UnknownTemplate(s.to_string()))
    }
}

/// Raw template body (user turn) for `id`.
pub fn template_text(id: TemplateId) -> &'static str {
    match id {
        TemplateId::Synthesizer => SYNTHESIZER,
        TemplateId::Reasoning => REASONING,
        TemplateId::Difficulty => DIFFICULTY,
        TemplateId::Quality => QUALITY,
    }
}

enum Piece<'a> {
    Literal(&'a str),
    Slot(&'a str),
}

/// Splits a template into literals and `{name}` slots, where a name is
/// `[a-z][a-z0-9_]*`. Anything else in braces is literal text.
fn pieces(template: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let bytes = template.as_bytes();
    let mut start = 0;
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i] == b'{' {
            let name_start = i + 1;
            let mut j = name_start;
            while j < bytes.len() && (bytes[j].is_ascii_lowercase() || (j > name_start && (bytes[j].is_ascii_digit() || bytes[j] == b'_'))) {
                j += 1;
            }
            if j > name_start && j < bytes.len() && bytes[j] == b'}' {
                if start < i {
                    out.push(Piece::Literal(&template[start..i]));
                }
                out.push(Piece::Slot(&template[name_start..j]));
                i = j + 1;
                start = i;
                continue;
            }
        }
        i += 1;
    }
    if start < template.len() {
        out.push(Piece::Literal(&template[start..]));
    }
    out
}

/// Placeholder names used by a template.
pub fn placeholders(id: TemplateId) -> BTreeSet<&'static str> {
    pieces(template_text(id))
        .into_iter()
        .filter_map(|p| match p {
            Piece::Slot(name) => Some(name),
            Piece::Literal(_) => None,
        })
        .collect()
}

/// Substitutes `bindings` into the named template. Every placeholder must be
/// bound and every binding must name a placeholder. Bound values are inserted
/// verbatim and never re-scanned.
pub fn render_prompt(template_id: &str, bindings: &BTreeMap<String, String>) -> Result<Prompt, GatewayError> {
    let id: TemplateId = template_id.parse()?;
    let names = placeholders(id);
    let missing: Vec<String> = names.iter().filter(|n| !bindings.contains_key(**n)).map(|n| n.to_string()).collect();
    if !missing.is_empty() {
        return Err(GatewayError::MissingBinding { template: id.to_string(), missing });
    }
    let extra: Vec<String> = bindings.keys().filter(|k| !names.contains(k.as_str())).cloned().collect();
    if !extra.is_empty() {
        return Err(GatewayError::ExtraBinding { template: id.to_string(), extra });
    }
    let text = pieces(template_text(id))
        .into_iter()
        .map(|p| match p {
            Piece::Literal(s) => s,
            Piece::Slot(name) => bindings[name].as_str(),
        })
        .collect();
    Ok(Prompt {
        template_id: id.to_string(),
        bindings: bindings.clone(),
        system: id.system().map(str::to_string),
        text,
        image_refs: Vec::new(),
        decode: id.decode(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bind(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
        pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
    }

    #[test]
    fn synthesizer_has_only_question_slot() {
        assert_eq!(placeholders(TemplateId::Synthesizer).into_iter().collect::<Vec<_>>(), ["question"]);
    }

    #[test]
    fn synthesizer_renders_question() {
        let p = render_prompt("synthesizer", &bind(&[("question", "What is 2+2?")])).unwrap();
        assert!(p.text.starts_with("Given an image and the following question, transform it into a significantly more challenging version that requires deeper reasoning but maintains the same answer."));
        assert!(p.text.contains("Original Question:\n\nWhat is 2+2?\n\nYour Response Format:"));
        assert!(p.text.ends_with("New Question: {Your transformed question}"));
    }

    #[test]
    fn answer_cannot_be_bound_to_synthesizer() {
        let err = render_prompt("synthesizer", &bind(&[("question", "q"), ("answer", "4")])).unwrap_err();
        assert!(matches!(err, GatewayError::ExtraBinding { extra, .. } if extra == ["answer"]));
    }

    #[test]
    fn reasoning_template() {
        let p = render_prompt("reasoning", &bind(&[("question", "Q")])).unwrap();
        assert!(p.text.contains("MUST BE enclosed within <think> </think>"));
        assert!(p.text.ends_with(r"The final answer MUST BE put in \boxed{}. Q"));
        assert_eq!(p.system.as_deref(), Some("You are a helpful assistant."));
        assert_eq!(p.decode, DecodeParams::ROLLOUT);
    }

    #[test]
    fn difficulty_template_uses_judge_temperature() {
        let p = render_prompt("difficulty", &bind(&[("problem_1", "A"), ("problem_2", "B")])).unwrap();
        assert_eq!(p.decode.temperature, 0.6);
        assert!(p.text.contains("FIRST PROBLEM:\nA\n"));
        assert!(p.text.ends_with(r#""WINNER: FIRST", "WINNER: SECOND", or "WINNER: TIE""#));
    }

    #[test]
    fn missing_binding() {
        let err = render_prompt("synthesizer", &BTreeMap::new()).unwrap_err();
        assert!(matches!(err, GatewayError::MissingBinding { missing, .. } if missing == ["question"]));
    }

    #[test]
    fn unknown_template() {
        assert!(matches!(render_prompt("nope", &BTreeMap::new()), Err(GatewayError::UnknownTemplate(_))));
    }

    #[test]
    fn bound_values_not_rescanned() {
        let p = render_prompt("reasoning", &bind(&[("question", "solve {question} and {x}")])).unwrap();
        assert!(p.text.ends_with("solve {question} and {x}"));
    }
}
