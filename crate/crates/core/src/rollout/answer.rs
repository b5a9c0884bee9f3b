use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unbalanced braces in \\boxed{{}} starting at byte {0}")]
pub struct ExtractError(pub usize);

const BOX: &str = "\\boxed{";

/// Content of the last `\boxed{...}` span, with nested braces balanced.
/// Returns `Ok(None)` when the text has no box.
pub fn extract_answer(text: &str) -> Result<Option<String>, ExtractError> {
    let mut last = None;
    let mut rest = 0;
    while let Some(offset) = text[rest..].find(BOX) {
        let open = rest + offset;
        let body = open + BOX.len();
        let mut depth = 1usize;
        let mut end = None;
        for (i, c) in text[body..].char_indices() {
            match c {
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        end = Some(body + i);
                        break;
                    }
                }
                _ => {}
            }
        }
        let end = end.ok_or(ExtractError(open))?;
        last = Some(text[body..end].to_string());
        rest = end + 1;
    }
    Ok(last)
}

/// Normalisation applied to both sides before comparing answers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatchPolicy {
    /// Remove all whitespace before comparing.
    pub normalize_whitespace: bool,
    pub case_insensitive: bool,
    /// Absolute tolerance when both sides parse as numbers; 0 means exact.
    pub numeric_tolerance: f64,
    /// Unwrap `$...$`, `\text{}`, `\mathrm{}`, `\left`/`\right`, degree and
    /// percent markers, and trailing periods.
    pub strip_latex_wrappers: bool,
}

impl Default for MatchPolicy {
    fn default() -> Self {
        Self { normalize_whitespace: true, case_insensitive: true, numeric_tolerance: 1e-6, strip_latex_wrappers: true }
    }
}

fn unwrap_command(s: &str, cmd: &str) -> String {
    let pattern = format!("\\{cmd}{{");
    let mut out = s.to_string();
    while let Some(start) = out.find(&pattern) {
        let body = start + pattern.len();
        let mut depth = 1usize;
        let mut close = None;
        for (i, c) in out[body..].char_indices() {
            match c {
                '{' => depth += 1,
                '}' => {
                    depth -= 1;
                    if depth == 0 {
                        close = Some(body + i);
                        break;
                    }
                }
                _ => {}
            }
        }
        let Some(close) = close else { break };
        out = format!("{}{}{}", &out[..start], &out[body..close], &out[close + 1..]);
    }
    out
}

fn strip_latex(s: &str) -> String {
    let mut t = s.trim().to_string();
    for (open, close) in [("$$", "$$"), ("$", "$"), ("\\(", "\\)"), ("\\[", "\\]")] {
        if t.len() >= open.len() + close.len() && t.starts_with(open) && t.ends_with(close) {
            t = t[open.len()..t.len() - close.len()].trim().to_string();
        }
    }
    for cmd in ["text", "textbf", "mathrm", "mathbf", "operatorname"] {
        t = unwrap_command(&t, cmd);
    }
    for token in ["\\left", "\\right", "\\!", "\\,", "\\;", "\\displaystyle", "^\\circ", "^{\\circ}", "\\circ", "°", "\\%", "%"] {
        t = t.replace(token, "");
    }
    t.replace("\\dfrac", "\\frac").replace("\\tfrac", "\\frac").trim().trim_end_matches('.').trim().to_string()
}

fn normalize(s: &str, policy: &MatchPolicy) -> String {
    let mut t = if policy.strip_latex_wrappers { strip_latex(s) } else { s.trim().to_string() };
    if policy.normalize_whitespace {
        t.retain(|c| !c.is_whitespace());
    }
    if policy.case_insensitive {
        t = t.to_lowercase();
    }
    t
}

/// Parses decimals, `a/b` and `\frac{a}{b}` (after normalisation).
fn parse_number(s: &str) -> Option<f64> {
    let s = s.trim();
    let finite = |x: f64| x.is_finite().then_some(x);
    if let Ok(x) = s.parse::<f64>() {
        return finite(x);
    }
    let (sign, body) = match s.strip_prefix('-') {
        Some(rest) => (-1.0, rest.trim()),
        None => (1.0, s),
    };
    if let Some(frac) = body.strip_prefix("\\frac{") {
        let (num, rest) = frac.split_once('}')?;
        let den = rest.strip_prefix('{')?.strip_suffix('}')?;
        let (n, d) = (num.trim().parse::<f64>().ok()?, den.trim().parse::<f64>().ok()?);
        return if d == 0.0 { None } else { finite(sign * n / d) };
    }
    let (num, den) = body.split_once('/')?;
    let (n, d) = (num.trim().parse::<f64>().ok()?, den.trim().parse::<f64>().ok()?);
    if d == 0.0 {
        None
    } else {
        finite(sign * n / d)
    }
}

/// True when the normalised forms agree, or both sides parse as numbers
/// within `policy.numeric_tolerance`.
pub fn match_answer(pred: &str, gold: &str, policy: &MatchPolicy) -> bool {
    let (p, g) = (normalize(pred, policy), normalize(gold, policy));
    if p == g {
        return true;
    }
    match (parse_number(&p), parse_number(&g)) {
        (Some(a), Some(b)) if policy.numeric_tolerance > 0.0 => (a - b).abs() <= policy.numeric_tolerance,
        (Some(a), Some(b)) => a == b,
        _ => false,
    }
}
