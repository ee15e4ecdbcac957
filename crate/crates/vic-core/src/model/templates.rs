//! Prompt templates and their rendering rules.
//!
//! Placeholders are `{name}` tokens. Each template in a set has a fixed
//! contract: some placeholders are required, anything outside the allowed
//! set is rejected up front so a typo fails at config load, not mid-run.

use std::sync::OnceLock;

use regex::Regex;
use thiserror::Error;

use super::PromptTemplateSet;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TemplateError {
    #[error("template {template}: missing required placeholder {{{placeholder}}}")]
    MissingPlaceholder {
        template: &'static str,
        placeholder: &'static str,
    },
    #[error("template {template}: unknown placeholder {{{placeholder}}}")]
    UnknownPlaceholder {
        template: &'static str,
        placeholder: String,
    },
}

fn placeholder_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\{([a-z_]+)\}").unwrap())
}

/// All `{name}` tokens appearing in a template, in order, with duplicates.
pub fn placeholders(template: &str) -> Vec<String> {
    placeholder_re()
        .captures_iter(template)
        .map(|c| c[1].to_string())
        .collect()
}

fn check(
    name: &'static str,
    template: &str,
    required: &[&'static str],
    allowed: &[&'static str],
) -> Result<(), TemplateError> {
    let found = placeholders(template);
    for req in required {
        if !found.iter().any(|p| p == req) {
            return Err(TemplateError::MissingPlaceholder {
                template: name,
                placeholder: req,
            });
        }
    }
    for p in found {
        if !allowed.contains(&p.as_str()) {
            return Err(TemplateError::UnknownPlaceholder {
                template: name,
                placeholder: p,
            });
        }
    }
    Ok(())
}

/// Enforce the placeholder contract of every template in the set.
pub fn validate_templates(set: &PromptTemplateSet) -> Result<(), TemplateError> {
    check(
        "vic_generation",
        &set.vic_generation,
        &["question"],
        &["question"],
    )?;
    check("cot", &set.cot, &["question"], &["question"])?;
    check(
        "extraction",
        &set.extraction,
        &["steps"],
        &["steps", "question"],
    )?;
    check(
        "reflection",
        &set.reflection,
        &["question", "rationale", "format_instruction"],
        &["question", "rationale", "format_instruction"],
    )?;
    check(
        "extraction_answer",
        &set.extraction_answer,
        &["raw"],
        &["raw", "qtype", "options"],
    )?;
    Ok(())
}

/// Substitute placeholders from `vars`; tokens without a binding are left
/// verbatim (validation guarantees the pipeline binds everything).
pub fn render_template(template: &str, vars: &[(&str, &str)]) -> String {
    placeholder_re()
        .replace_all(template, |caps: &regex::Captures<'_>| {
            let name = &caps[1];
            vars.iter()
                .find(|(k, _)| *k == name)
                .map(|(_, v)| (*v).to_string())
                .unwrap_or_else(|| caps[0].to_string())
        })
        .into_owned()
}

/// The literal text before the first placeholder. For the reflection
/// template this span carries the "reconsider before answering" directive,
/// so disabling reflection means rendering without the span.
pub fn leading_span(template: &str) -> &str {
    match placeholder_re().find(template) {
        Some(m) => &template[..m.start()],
        None => template,
    }
}

/// The template with its leading literal span removed.
pub fn strip_leading_span(template: &str) -> &str {
    match placeholder_re().find(template) {
        Some(m) => &template[m.start()..],
        None => "",
    }
}

/// Built-in prompt set. Chain generation is image-free by construction;
/// rationale extraction omits the question so observation stays uncoupled
/// from the final task.
pub fn default_templates() -> PromptTemplateSet {
    PromptTemplateSet {
        vic_generation: "You cannot see the image yet. From the question alone, write a \
numbered list of visual inspection steps that would let someone answer it by looking at \
the image. Each step must name one concrete thing to locate, read, count, or compare. \
End with a final numbered line starting with \"Format:\" that states exactly how the \
final answer must be written.\n\nQuestion: {question}"
            .to_string(),
        cot: "{question}\n\nLet's think step by step.".to_string(),
        extraction: "Carry out the inspection steps below on the image and report what \
you actually observe for each step. Report observations only; do not answer any final \
question.\n\nSteps:\n{steps}\n\nObservations:"
            .to_string(),
        reflection: "Review the findings below against the image before answering; when \
a finding conflicts with what the image shows, trust the image.\n\nQuestion: \
{question}\n\nFindings:\n{rationale}\n\n{format_instruction}"
            .to_string(),
        extraction_answer: "Extract the final answer from the response below.\nQuestion \
type: {qtype}\nOptions:\n{options}\n\nResponse:\n{raw}\n\nReply with only the answer: \
yes or no for yes/no questions, the option letter for multiple choice, otherwise the \
bare value."
            .to_string(),
    }
}
