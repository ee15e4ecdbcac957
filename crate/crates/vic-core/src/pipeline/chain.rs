//! Parsing model output into a structured inference chain.
//!
//! A chain is a numbered list of inspection steps whose final entry is a
//! format instruction for the eventual answer. The generator is prompted
//! for exactly that shape, but parsing tolerates the usual drift: `1.`,
//! `2)`, `Step 3:` markers, continuation lines, and an unnumbered final
//! `Format:` line.

use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use crate::model::VisualInferenceChain;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("chain parse failed: {reason}")]
pub struct ChainParseError {
    pub reason: String,
}

fn marker_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    // `1.` / `2)` / `Step 3:` / `step 4 -` at line start
    RE.get_or_init(|| {
        Regex::new(r"(?i)^\s*(?:step\s+)?(\d+)\s*[.):\-]\s*").unwrap()
    })
}

fn format_label_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)^\s*format\s*:?\s*").unwrap())
}

/// Split raw generator output into numbered segments, then into steps plus
/// the trailing format instruction. Needs at least two segments: one step
/// and the format line.
pub fn parse_chain(raw: &str) -> Result<VisualInferenceChain, ChainParseError> {
    let mut segments: Vec<String> = Vec::new();
    for line in raw.lines() {
        if line.trim().is_empty() {
            continue;
        }
        if let Some(m) = marker_re().find(line) {
            segments.push(line[m.end()..].trim().to_string());
        } else if format_label_re().is_match(line) && !segments.is_empty() {
            // unnumbered trailing "Format:" line becomes its own segment
            segments.push(line.trim().to_string());
        } else if let Some(last) = segments.last_mut() {
            if !last.is_empty() {
                last.push(' ');
            }
            last.push_str(line.trim());
        }
        // text before the first marker is preamble; drop it
    }
    segments.retain(|s| !s.is_empty());
    if segments.len() < 2 {
        return Err(ChainParseError {
            reason: format!(
                "found {} numbered segment(s), need at least one step plus a format line",
                segments.len()
            ),
        });
    }
    let format_raw = segments.pop().unwrap();
    let format_instruction = format_label_re()
        .replace(&format_raw, "")
        .trim()
        .to_string();
    if format_instruction.is_empty() {
        return Err(ChainParseError {
            reason: "format instruction is empty".to_string(),
        });
    }
    Ok(VisualInferenceChain::new(segments, format_instruction, raw.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_dotted_list() {
        let raw = "1. Look at the sky region.\n2. Check for birds.\n3. Format: answer yes or no.";
        let chain = parse_chain(raw).unwrap();
        assert_eq!(chain.steps, vec!["Look at the sky region.", "Check for birds."]);
        assert_eq!(chain.format_instruction, "answer yes or no.");
        assert_eq!(chain.k, 3);
        assert_eq!(chain.raw, raw);
    }

    #[test]
    fn parses_mixed_markers_and_continuations() {
        let raw = "Here is the plan:\n\
                   Step 1: Find the clock\n   and read both hands.\n\
                   2) Note the hour.\n\
                   3. Format: answer with the number only";
        let chain = parse_chain(raw).unwrap();
        assert_eq!(chain.steps.len(), 2);
        assert_eq!(chain.steps[0], "Find the clock and read both hands.");
        assert_eq!(chain.format_instruction, "answer with the number only");
    }

    #[test]
    fn unnumbered_format_line_is_split_out() {
        let raw = "1. Count the chairs.\n2. Count the tables.\nFormat: answer with a number";
        let chain = parse_chain(raw).unwrap();
        assert_eq!(chain.steps.len(), 2);
        assert_eq!(chain.format_instruction, "answer with a number");
        assert_eq!(chain.k, 3);
    }

    #[test]
    fn single_segment_is_rejected() {
        let err = parse_chain("1. only one line").unwrap_err();
        assert!(err.reason.contains("1 numbered segment"));
        assert!(parse_chain("free prose with no numbering at all").is_err());
        assert!(parse_chain("").is_err());
    }

    #[test]
    fn format_label_is_stripped_case_insensitively() {
        let chain = parse_chain("1. look\n2. FORMAT: reply 'yes' or 'no'").unwrap();
        assert_eq!(chain.format_instruction, "reply 'yes' or 'no'");
    }

    #[test]
    fn last_segment_without_label_still_counts_as_format() {
        let chain = parse_chain("1. look closely\n2. answer with the option letter").unwrap();
        assert_eq!(chain.steps, vec!["look closely"]);
        assert_eq!(chain.format_instruction, "answer with the option letter");
    }

    #[test]
    fn k_matches_segment_count() {
        let raw = "1. a\n2. b\n3. c\n4. d\n5. Format: yes/no";
        let chain = parse_chain(raw).unwrap();
        assert_eq!(chain.steps.len(), 4);
        assert_eq!(chain.k, 5);
    }
}
