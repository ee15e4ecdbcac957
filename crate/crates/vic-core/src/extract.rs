//! Answer normalization and correctness judging.
//!
//! `rule_extract` turns a free-form model reply into a canonical answer
//! token, or the [`UNPARSEABLE`] sentinel when no rule applies. It is pure,
//! total, and idempotent: feeding a successful extraction back in returns
//! it unchanged. When rules fail, `model_extract` asks a model to restate
//! the answer and then normalizes that reply with the same rules.

use std::sync::OnceLock;

use regex::Regex;

use crate::model::{render_template, BenchmarkItem, PromptTemplateSet, QType, UNPARSEABLE};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtractionMethod {
    Rule,
    Model,
    None,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Extraction {
    pub parsed: String,
    pub method: ExtractionMethod,
}

fn yes_no_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)\b(yes|no)\b").unwrap())
}

fn letter_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\b[A-Za-z]\b").unwrap())
}

fn number_res() -> &'static [Regex; 3] {
    static RE: OnceLock<[Regex; 3]> = OnceLock::new();
    RE.get_or_init(|| {
        [
            // comma-grouped, e.g. 12,345.6
            Regex::new(r"-?\d{1,3}(?:,\d{3})+(?:\.\d+)?").unwrap(),
            // simple fraction, e.g. 3/10
            Regex::new(r"-?\d+\s*/\s*\d+").unwrap(),
            // plain integer or decimal
            Regex::new(r"-?\d+(?:\.\d+)?").unwrap(),
        ]
    })
}

/// Last word-bounded yes/no, lowercased.
fn extract_yorn(raw: &str) -> Option<String> {
    yes_no_re()
        .find_iter(raw)
        .last()
        .map(|m| m.as_str().to_ascii_lowercase())
}

fn option_index(letter: char, option_count: usize) -> Option<usize> {
    let idx = (letter.to_ascii_uppercase() as u8).checked_sub(b'A')? as usize;
    (idx < option_count).then_some(idx)
}

fn char_before(s: &str, byte: usize) -> Option<char> {
    s[..byte].chars().next_back()
}

fn char_after(s: &str, byte: usize) -> Option<char> {
    s[byte..].chars().next()
}

/// Standalone option-letter mentions. A letter counts when it is
/// parenthesized ("(c)"), carries enumerator punctuation ("C." / "c)" /
/// "B:"), or stands alone in uppercase ("The answer is B"). Lowercase
/// letters without punctuation are ignored, and a bare uppercase "A" at
/// the start of a sentence is treated as the article, not the option.
fn letter_candidates(raw: &str, option_count: usize, out: &mut Vec<(usize, u8, String)>) {
    for m in letter_re().find_iter(raw) {
        let letter = m.as_str().chars().next().unwrap();
        let Some(_) = option_index(letter, option_count) else {
            continue;
        };
        let prev = char_before(raw, m.start());
        let next = char_after(raw, m.end());
        let parenthesized = prev == Some('(') && next == Some(')');
        let enumerator = matches!(next, Some('.') | Some(')') | Some(':'));
        let bare_upper = letter.is_ascii_uppercase()
            && (letter != 'A'
                || raw[..m.start()]
                    .trim_end()
                    .chars()
                    .next_back()
                    .map_or(false, |c| !matches!(c, '.' | '!' | '?')));
        if parenthesized || enumerator || bare_upper {
            out.push((m.start(), 1, letter.to_ascii_uppercase().to_string()));
        }
    }
}

/// Word-bounded, ASCII-case-insensitive occurrences of each option's text,
/// mapped back to its letter.
fn option_text_candidates(raw: &str, options: &[String], out: &mut Vec<(usize, u8, String)>) {
    let bytes = raw.as_bytes();
    for (idx, opt) in options.iter().enumerate() {
        let needle = opt.trim();
        if needle.is_empty() {
            continue;
        }
        let nb = needle.as_bytes();
        for (start, _) in raw.char_indices() {
            let end = start + nb.len();
            if end > bytes.len() || !raw.is_char_boundary(end) {
                continue;
            }
            if !bytes[start..end].eq_ignore_ascii_case(nb) {
                continue;
            }
            let prev_ok = char_before(raw, start).map_or(true, |c| !c.is_alphanumeric());
            let next_ok = char_after(raw, end).map_or(true, |c| !c.is_alphanumeric());
            if prev_ok && next_ok {
                out.push((start, 0, BenchmarkItem::option_label(idx)));
            }
        }
    }
}

fn extract_mcq(raw: &str, options: &[String]) -> Option<String> {
    // A reply that is nothing but one letter is accepted in any case.
    let whole = raw.trim().trim_end_matches('.').trim();
    if whole.chars().count() == 1 {
        let c = whole.chars().next().unwrap();
        if c.is_ascii_alphabetic() && option_index(c, options.len()).is_some() {
            return Some(c.to_ascii_uppercase().to_string());
        }
    }
    // (position, priority, letter); the latest mention wins, letter forms
    // beating option-text matches that start at the same byte.
    let mut candidates: Vec<(usize, u8, String)> = Vec::new();
    letter_candidates(raw, options.len(), &mut candidates);
    option_text_candidates(raw, options, &mut candidates);
    candidates
        .into_iter()
        .max_by_key(|(pos, prio, _)| (*pos, *prio))
        .map(|(_, _, letter)| letter)
}

/// All number tokens with overlaps resolved toward the longest match.
fn number_tokens(raw: &str) -> Vec<(usize, usize, String)> {
    let mut spans: Vec<(usize, usize)> = Vec::new();
    for re in number_res() {
        for m in re.find_iter(raw) {
            let (mut start, end) = (m.start(), m.end());
            // "5-3" must not read the 3 as negative
            if raw[start..].starts_with('-')
                && char_before(raw, start).map_or(false, |c| c.is_alphanumeric())
            {
                start += 1;
            }
            if !spans
                .iter()
                .any(|&(s, e)| s <= start && end <= e && (s, e) != (start, end))
            {
                spans.retain(|&(s, e)| !(start <= s && e <= end));
                spans.push((start, end));
            }
        }
    }
    spans.sort();
    spans.dedup();
    spans
        .into_iter()
        .map(|(s, e)| (s, e, raw[s..e].to_string()))
        .collect()
}

fn normalize_number(token: &str) -> String {
    let compact = token.replace([',', ' '], "");
    if let Some((num, den)) = compact.split_once('/') {
        if let (Ok(n), Ok(d)) = (num.parse::<f64>(), den.parse::<f64>()) {
            if d != 0.0 {
                return format!("{}", n / d);
            }
        }
    }
    compact
}

fn extract_free(raw: &str) -> Option<String> {
    if let Some((_, _, token)) = number_tokens(raw).into_iter().last() {
        return Some(normalize_number(&token));
    }
    // Fall back to a short bare value: one line, at most three words.
    let cleaned: String = raw.replace(['"', '\''], "");
    let line = cleaned.trim().trim_end_matches(['.', '!']).trim();
    if !line.is_empty() && !line.contains('\n') && line.split_whitespace().count() <= 3 {
        return Some(line.split_whitespace().collect::<Vec<_>>().join(" "));
    }
    None
}

/// Normalize a raw reply into a canonical answer token.
/// Returns [`UNPARSEABLE`] when no rule matches; never panics.
pub fn rule_extract(raw: &str, qtype: QType, options: Option<&[String]>) -> String {
    let parsed = match qtype {
        QType::Yorn => extract_yorn(raw),
        QType::Mcq => extract_mcq(raw, options.unwrap_or(&[])),
        QType::Free => extract_free(raw),
    };
    parsed.unwrap_or_else(|| UNPARSEABLE.to_string())
}

/// Ask a model to restate the answer, then normalize its reply with the
/// same rules. Any failure degrades to an unparsed outcome instead of an
/// error: extraction must never sink an otherwise healthy run.
pub fn model_extract<F>(
    raw: &str,
    qtype: QType,
    options: Option<&[String]>,
    templates: &PromptTemplateSet,
    call: F,
) -> Extraction
where
    F: FnOnce(String) -> Result<String, String>,
{
    let options_block = options
        .map(|opts| {
            opts.iter()
                .enumerate()
                .map(|(i, o)| format!("{}. {}", BenchmarkItem::option_label(i), o))
                .collect::<Vec<_>>()
                .join("\n")
        })
        .unwrap_or_else(|| "(none)".to_string());
    let prompt = render_template(
        &templates.extraction_answer,
        &[
            ("raw", raw),
            ("qtype", &qtype.to_string()),
            ("options", &options_block),
        ],
    );
    let reply = match call(prompt) {
        Ok(r) => r,
        Err(_) => {
            return Extraction {
                parsed: UNPARSEABLE.to_string(),
                method: ExtractionMethod::None,
            }
        }
    };
    let parsed = rule_extract(&reply, qtype, options);
    if parsed == UNPARSEABLE {
        Extraction {
            parsed,
            method: ExtractionMethod::None,
        }
    } else {
        Extraction {
            parsed,
            method: ExtractionMethod::Model,
        }
    }
}

pub const NUMERIC_TOLERANCE: f64 = 1e-3;

fn parse_number(s: &str) -> Option<f64> {
    let compact = s.trim().replace(',', "");
    if let Some((num, den)) = compact.split_once('/') {
        let (n, d) = (num.trim().parse::<f64>().ok()?, den.trim().parse::<f64>().ok()?);
        if d == 0.0 {
            return None;
        }
        return Some(n / d);
    }
    compact.parse::<f64>().ok()
}

fn numbers_close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs())
}

/// Judge a parsed answer against gold with a relative numeric tolerance
/// for free-form values.
pub fn judge_correct_with_tol(item: &BenchmarkItem, parsed: &str, tol: f64) -> bool {
    if parsed == UNPARSEABLE {
        return false;
    }
    let gold = item.gold.trim();
    let parsed = parsed.trim();
    match item.qtype {
        QType::Yorn | QType::Mcq => parsed.eq_ignore_ascii_case(gold),
        QType::Free => match (parse_number(parsed), parse_number(gold)) {
            (Some(a), Some(b)) => numbers_close(a, b, tol),
            _ => {
                let strip = |s: &str| s.trim_end_matches('.').trim().to_ascii_lowercase();
                strip(parsed) == strip(gold)
            }
        },
    }
}

pub fn judge_correct(item: &BenchmarkItem, parsed: &str) -> bool {
    judge_correct_with_tol(item, parsed, NUMERIC_TOLERANCE)
}
