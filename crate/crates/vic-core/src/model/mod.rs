//! Shared data model: benchmark items, inference chains, run records, and
//! the method/template configuration that drives the pipeline.
//!
//! All types here are immutable values after construction and safe to share
//! across worker threads.

mod digest;
mod io;
mod templates;
mod validate;

pub use digest::{bytes_digest, canonical_digest};
pub use io::{
    read_items, read_jsonl, read_run_records, write_items, write_jsonl, write_run_records,
    JsonlError,
};
pub use templates::{
    default_templates, leading_span, placeholders, render_template, strip_leading_span,
    validate_templates, TemplateError,
};
pub use validate::{validate_item, InvalidItem};

use std::fmt;

use serde::{Deserialize, Serialize};

/// Sentinel for answers the extraction layer could not normalize.
/// Distinct from the empty string so reports can count extraction failures.
pub const UNPARSEABLE: &str = "UNPARSEABLE";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Benchmark {
    Mmvp,
    Hallusionbench,
    PopeAdv,
    Mme,
    Mathvista,
    Seedbench,
    Custom,
}

impl Benchmark {
    pub fn as_str(&self) -> &'static str {
        match self {
            Benchmark::Mmvp => "mmvp",
            Benchmark::Hallusionbench => "hallusionbench",
            Benchmark::PopeAdv => "pope_adv",
            Benchmark::Mme => "mme",
            Benchmark::Mathvista => "mathvista",
            Benchmark::Seedbench => "seedbench",
            Benchmark::Custom => "custom",
        }
    }

    pub fn parse(s: &str) -> Option<Benchmark> {
        match s {
            "mmvp" => Some(Benchmark::Mmvp),
            "hallusionbench" => Some(Benchmark::Hallusionbench),
            "pope_adv" => Some(Benchmark::PopeAdv),
            "mme" => Some(Benchmark::Mme),
            "mathvista" => Some(Benchmark::Mathvista),
            "seedbench" => Some(Benchmark::Seedbench),
            "custom" => Some(Benchmark::Custom),
            _ => None,
        }
    }
}

impl fmt::Display for Benchmark {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QType {
    Yorn,
    Mcq,
    Free,
}

impl fmt::Display for QType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QType::Yorn => "yorn",
            QType::Mcq => "mcq",
            QType::Free => "free",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Difficulty {
    Easy,
    Hard,
}

/// One normalized question from a benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkItem {
    pub id: String,
    pub benchmark: Benchmark,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_ref: Option<String>,
    pub question: String,
    pub qtype: QType,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub options: Option<Vec<String>>,
    pub gold: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subtask: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub figure_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<Difficulty>,
}

impl BenchmarkItem {
    /// Option label ("A", "B", ...) for a zero-based option index.
    pub fn option_label(index: usize) -> String {
        ((b'A' + index as u8) as char).to_string()
    }

    /// The question plus, for multiple choice, a lettered option block.
    /// This is what every prompt that needs "the question" receives.
    pub fn question_block(&self) -> String {
        match (&self.qtype, &self.options) {
            (QType::Mcq, Some(options)) => {
                let mut out = self.question.clone();
                out.push_str("\nOptions:");
                for (i, opt) in options.iter().enumerate() {
                    out.push_str(&format!("\n{}. {}", Self::option_label(i), opt));
                }
                out
            }
            _ => self.question.clone(),
        }
    }
}

/// Parsed stage-1 output: reasoning steps plus the trailing format instruction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VisualInferenceChain {
    pub steps: Vec<String>,
    pub format_instruction: String,
    pub raw: String,
    pub k: usize,
}

impl VisualInferenceChain {
    pub fn new(steps: Vec<String>, format_instruction: String, raw: String) -> Self {
        let k = steps.len() + 1;
        VisualInferenceChain {
            steps,
            format_instruction,
            raw,
            k,
        }
    }

    /// Steps rendered as a numbered list, format instruction excluded.
    pub fn numbered_steps(&self) -> String {
        self.steps
            .iter()
            .enumerate()
            .map(|(i, s)| format!("{}. {}", i + 1, s))
            .collect::<Vec<_>>()
            .join("\n")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RationaleMode {
    SingleStep,
    MultiStep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationaleEntry {
    pub step_index: usize,
    pub text: String,
}

/// Stage-2 output: rationales extracted from the image by following the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RationaleSet {
    pub entries: Vec<RationaleEntry>,
    pub mode: RationaleMode,
    pub combined: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Direct,
    Cot,
    Vic,
    VicMultistep,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Direct => "direct",
            Method::Cot => "cot",
            Method::Vic => "vic",
            Method::VicMultistep => "vic_multistep",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "direct" => Some(Method::Direct),
            "cot" => Some(Method::Cot),
            "vic" => Some(Method::Vic),
            "vic_multistep" => Some(Method::VicMultistep),
            _ => None,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A provider/model pair, written as `provider_id/model_id` in configs.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModelRef {
    pub provider: String,
    pub model: String,
}

impl ModelRef {
    /// Parse `provider/model`; the model id may itself contain slashes.
    pub fn parse(s: &str) -> Option<ModelRef> {
        let (provider, model) = s.split_once('/')?;
        if provider.is_empty() || model.is_empty() {
            return None;
        }
        Some(ModelRef {
            provider: provider.to_string(),
            model: model.to_string(),
        })
    }
}

impl fmt::Display for ModelRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.provider, self.model)
    }
}

impl Serialize for ModelRef {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for ModelRef {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        ModelRef::parse(&s)
            .ok_or_else(|| serde::de::Error::custom(format!("expected provider/model, got {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub temperature: f64,
    pub max_tokens: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl Default for Sampling {
    fn default() -> Self {
        // The source experiments never state sampling parameters; 0.0/2048
        // keeps evaluation runs deterministic.
        Sampling {
            temperature: 0.0,
            max_tokens: 2048,
            seed: None,
        }
    }
}

fn default_true() -> bool {
    true
}

fn default_prompt_set() -> String {
    "default".to_string()
}

/// Which method to run and which models fill the generator/executor roles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodConfig {
    pub method: Method,
    /// Chain generator (role f). Ignored for direct and cot.
    pub generator: ModelRef,
    /// Multimodal executor (role f').
    pub executor: ModelRef,
    /// Optional model-based answer extractor, used when rules fail.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extractor: Option<ModelRef>,
    #[serde(default = "default_true")]
    pub reflection_enabled: bool,
    #[serde(default)]
    pub include_question_at_extraction: bool,
    #[serde(default = "default_prompt_set")]
    pub prompt_set: String,
    #[serde(default)]
    pub sampling: Sampling,
}

impl MethodConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.sampling.temperature < 0.0 {
            return Err(format!(
                "sampling.temperature must be >= 0, got {}",
                self.sampling.temperature
            ));
        }
        if self.sampling.max_tokens == 0 {
            return Err("sampling.max_tokens must be > 0".to_string());
        }
        Ok(())
    }
}

/// Prompt templates for every pipeline stage. Placeholders are written
/// `{name}`; [`validate_templates`] enforces the declared set per template.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplateSet {
    /// Chain generation (P_vic). Placeholder: {question}.
    pub vic_generation: String,
    /// Zero-shot CoT (P_cot). Placeholder: {question}.
    pub cot: String,
    /// Rationale extraction (P_extract). Placeholders: {steps}, optional {question}.
    pub extraction: String,
    /// Answer stage with the reflection span (P_reflect). The literal text
    /// before the first placeholder is treated as the reflection span and is
    /// dropped when reflection is disabled. Placeholders: {question},
    /// {rationale}, {format_instruction}.
    pub reflection: String,
    /// Answer extractor prompt. Placeholders: {raw}, {qtype}, {options}.
    pub extraction_answer: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageName {
    Generate,
    Extract,
    ExtractStep,
    Answer,
    Baseline,
}

impl StageName {
    pub fn as_str(&self) -> &'static str {
        match self {
            StageName::Generate => "generate",
            StageName::Extract => "extract",
            StageName::ExtractStep => "extract_step",
            StageName::Answer => "answer",
            StageName::Baseline => "baseline",
        }
    }

    pub fn parse(s: &str) -> Option<StageName> {
        match s {
            "generate" => Some(StageName::Generate),
            "extract" => Some(StageName::Extract),
            "extract_step" => Some(StageName::ExtractStep),
            "answer" => Some(StageName::Answer),
            "baseline" => Some(StageName::Baseline),
            _ => None,
        }
    }
}

impl fmt::Display for StageName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One dispatched request/response within an item's run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub name: StageName,
    pub request_digest: String,
    pub has_image: bool,
    pub response: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Usage {
    pub calls: u32,
    pub cache_hits: u32,
    pub prompt_chars: u64,
    pub completion_chars: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub per_stage: Vec<f64>,
    pub total: f64,
}

/// Full per-item transcript of one method run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub item_id: String,
    pub method: Method,
    pub stages: Vec<StageRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chain: Option<VisualInferenceChain>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<RationaleSet>,
    pub raw_answer: String,
    pub parsed_answer: String,
    pub correct: bool,
    pub usage: Usage,
    pub timing_ms: Timing,
    /// Set when a stage failed; names the failing stage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}
