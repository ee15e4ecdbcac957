//! The inference methods under evaluation.
//!
//! Four methods share one transcript shape:
//!
//! - `direct` — one multimodal call: image + question.
//! - `cot` — one multimodal call with a think-step-by-step suffix.
//! - `vic` — chain generation *without the image*, one rationale
//!   extraction call over the image, then a reflective answer call.
//! - `vic_multistep` — like `vic`, but each chain step gets its own
//!   extraction call that re-inputs the image and the findings so far.
//!
//! Chain generation is deliberately blind: the generator request never
//! carries an image part, so the plan comes from the question alone.
//! Rationale extraction by default omits the question entirely; the
//! executor follows inspection steps without knowing what will be asked.

mod chain;

pub use chain::{parse_chain, ChainParseError};

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use thiserror::Error;

use crate::extract::{judge_correct, model_extract, rule_extract, ExtractionMethod};
use crate::model::{
    render_template, strip_leading_span, BenchmarkItem, Method, MethodConfig, ModelRef,
    PromptTemplateSet, QType, RationaleEntry, RationaleMode, RationaleSet, RunRecord, StageName,
    StageRecord, Timing, Usage, VisualInferenceChain, UNPARSEABLE,
};
use crate::providers::{
    MessagePart, ModelRequest, ProviderError, ProviderPool, RequestTag, ResponseCache,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("stage {stage}: {source}")]
    Stage {
        stage: StageName,
        #[source]
        source: ProviderError,
    },
    #[error("extraction step {step} of {total} failed: {source}")]
    StepFailed {
        step: usize,
        total: usize,
        #[source]
        source: Box<PipelineError>,
    },
    #[error("{0}")]
    ChainParse(#[from] ChainParseError),
    #[error("image {path} could not be read: {message}")]
    MissingImage { path: String, message: String },
}

/// Everything a single item run needs, shared across worker threads.
pub struct PipelineContext<'a> {
    pub pool: &'a ProviderPool,
    pub cache: Option<&'a ResponseCache>,
    pub templates: &'a PromptTemplateSet,
    pub config: &'a MethodConfig,
    /// Base directory against which `image_ref` paths resolve.
    pub image_root: &'a Path,
}

/// Answer format hint appended to baseline prompts and used by answer
/// prompts when a chain supplies no usable instruction.
pub fn format_hint(qtype: QType) -> &'static str {
    match qtype {
        QType::Yorn => "Answer yes or no.",
        QType::Mcq => "Answer with the option letter.",
        QType::Free => "Answer with only the final value.",
    }
}

/// Issues stage calls for one item and accumulates the transcript.
struct StageRunner<'a> {
    ctx: &'a PipelineContext<'a>,
    item: &'a BenchmarkItem,
    stages: Vec<StageRecord>,
    usage: Usage,
    per_stage_ms: Vec<f64>,
    image: Option<Arc<Vec<u8>>>,
    image_loaded: bool,
}

impl<'a> StageRunner<'a> {
    fn new(ctx: &'a PipelineContext<'a>, item: &'a BenchmarkItem) -> Self {
        StageRunner {
            ctx,
            item,
            stages: Vec::new(),
            usage: Usage::default(),
            per_stage_ms: Vec::new(),
            image: None,
            image_loaded: false,
        }
    }

    fn load_image(&mut self) -> Result<Option<Arc<Vec<u8>>>, PipelineError> {
        if !self.image_loaded {
            self.image_loaded = true;
            if let Some(image_ref) = &self.item.image_ref {
                let path = self.ctx.image_root.join(image_ref);
                let bytes = std::fs::read(&path).map_err(|e| PipelineError::MissingImage {
                    path: path.display().to_string(),
                    message: e.to_string(),
                })?;
                self.image = Some(Arc::new(bytes));
            }
        }
        Ok(self.image.clone())
    }

    /// Dispatch one stage call. Every dispatch, successful or not, leaves a
    /// stage record behind so partial transcripts stay inspectable.
    fn call(
        &mut self,
        stage: StageName,
        model: &ModelRef,
        prompt: String,
        with_image: bool,
    ) -> Result<String, PipelineError> {
        let mut parts = vec![MessagePart::text(prompt)];
        if with_image {
            if let Some(bytes) = self.load_image()? {
                parts.push(MessagePart::Image {
                    image_digest: crate::model::bytes_digest(&bytes),
                    bytes: Some(bytes),
                });
            }
        }
        let request = ModelRequest {
            provider_id: model.provider.clone(),
            model_id: model.model.clone(),
            parts,
            sampling: self.ctx.config.sampling.clone(),
            tag: Some(RequestTag {
                item_id: self.item.id.clone(),
                stage,
            }),
        };
        let digest = request.digest();
        let has_image = request.has_image();
        self.usage.calls += 1;
        self.usage.prompt_chars += request.prompt_chars();
        let started = Instant::now();
        let outcome = match self.ctx.cache {
            Some(cache) => self.ctx.pool.complete_cached(&request, cache),
            None => self.ctx.pool.complete(&request),
        };
        self.per_stage_ms.push(started.elapsed().as_secs_f64() * 1000.0);
        match outcome {
            Ok(response) => {
                if response.from_cache {
                    self.usage.cache_hits += 1;
                }
                self.usage.completion_chars += response.text.chars().count() as u64;
                self.stages.push(StageRecord {
                    name: stage,
                    request_digest: digest,
                    has_image,
                    response: response.text.clone(),
                });
                Ok(response.text)
            }
            Err(e) => {
                self.stages.push(StageRecord {
                    name: stage,
                    request_digest: digest,
                    has_image,
                    response: String::new(),
                });
                Err(PipelineError::Stage { stage, source: e })
            }
        }
    }

    fn timing(&self) -> Timing {
        Timing {
            total: self.per_stage_ms.iter().sum(),
            per_stage: self.per_stage_ms.clone(),
        }
    }
}

/// Generate an inference chain from the question alone. The request never
/// carries the image. A malformed reply earns exactly one reprompt.
fn generate_chain(
    runner: &mut StageRunner<'_>,
    templates: &PromptTemplateSet,
    generator: &ModelRef,
    question_block: &str,
) -> Result<VisualInferenceChain, PipelineError> {
    let prompt = render_template(&templates.vic_generation, &[("question", question_block)]);
    let raw = runner.call(StageName::Generate, generator, prompt.clone(), false)?;
    match parse_chain(&raw) {
        Ok(chain) => Ok(chain),
        Err(_) => {
            let retry_prompt = format!(
                "{prompt}\n\nYour previous reply was not a numbered list. Reply again with \
numbered steps, one per line, ending with a final numbered line that starts with \
\"Format:\"."
            );
            let raw = runner.call(StageName::Generate, generator, retry_prompt, false)?;
            Ok(parse_chain(&raw)?)
        }
    }
}

fn question_for_extraction(config: &MethodConfig, item: &BenchmarkItem) -> String {
    if config.include_question_at_extraction {
        item.question_block()
    } else {
        String::new()
    }
}

/// Render the extraction prompt for a given steps block, honoring the
/// question-coupling switch whether or not the template has a slot for it.
fn extraction_prompt(
    templates: &PromptTemplateSet,
    config: &MethodConfig,
    item: &BenchmarkItem,
    steps_block: &str,
) -> String {
    let question = question_for_extraction(config, item);
    let mut prompt = render_template(
        &templates.extraction,
        &[("steps", steps_block), ("question", question.trim())],
    );
    if config.include_question_at_extraction
        && !crate::model::placeholders(&templates.extraction).contains(&"question".to_string())
    {
        prompt.push_str("\n\nOriginal question: ");
        prompt.push_str(&item.question_block());
    }
    prompt
}

/// One extraction call covering the whole chain.
fn extract_single(
    runner: &mut StageRunner<'_>,
    chain: &VisualInferenceChain,
) -> Result<RationaleSet, PipelineError> {
    let ctx = runner.ctx;
    let prompt = extraction_prompt(ctx.templates, ctx.config, runner.item, &chain.numbered_steps());
    let executor = ctx.config.executor.clone();
    let text = runner.call(StageName::Extract, &executor, prompt, true)?;
    Ok(RationaleSet {
        entries: vec![RationaleEntry {
            step_index: 0,
            text: text.clone(),
        }],
        mode: RationaleMode::SingleStep,
        combined: text,
    })
}

/// One extraction call per chain step, re-sending the image every time and
/// feeding each call the findings accumulated so far.
fn extract_multistep(
    runner: &mut StageRunner<'_>,
    chain: &VisualInferenceChain,
) -> Result<RationaleSet, PipelineError> {
    let ctx = runner.ctx;
    let executor = ctx.config.executor.clone();
    let mut entries: Vec<RationaleEntry> = Vec::new();
    for (i, step) in chain.steps.iter().enumerate() {
        let step_block = format!("{}. {}", i + 1, step);
        let mut prompt = extraction_prompt(ctx.templates, ctx.config, runner.item, &step_block);
        if !entries.is_empty() {
            let sofar = entries
                .iter()
                .map(|e| format!("{}. {}", e.step_index, e.text))
                .collect::<Vec<_>>()
                .join("\n");
            prompt.push_str("\n\nFindings so far:\n");
            prompt.push_str(&sofar);
        }
        let text = runner
            .call(StageName::ExtractStep, &executor, prompt, true)
            .map_err(|e| PipelineError::StepFailed {
                step: i + 1,
                total: chain.steps.len(),
                source: Box::new(e),
            })?;
        entries.push(RationaleEntry {
            step_index: i + 1,
            text,
        });
    }
    let combined = entries
        .iter()
        .map(|e| format!("{}. {}", e.step_index, e.text))
        .collect::<Vec<_>>()
        .join("\n");
    Ok(RationaleSet {
        entries,
        mode: RationaleMode::MultiStep,
        combined,
    })
}

/// The answer-stage prompt. With reflection disabled the prompt is the same
/// template minus its leading directive span, so the two variants differ by
/// exactly that text.
pub fn answer_prompt(
    templates: &PromptTemplateSet,
    config: &MethodConfig,
    item: &BenchmarkItem,
    chain: &VisualInferenceChain,
    rationale: &RationaleSet,
) -> String {
    let template: &str = if config.reflection_enabled {
        &templates.reflection
    } else {
        strip_leading_span(&templates.reflection)
    };
    let format_instruction = if chain.format_instruction.trim().is_empty() {
        format_hint(item.qtype).to_string()
    } else {
        chain.format_instruction.clone()
    };
    render_template(
        template,
        &[
            ("question", item.question_block().as_str()),
            ("rationale", rationale.combined.as_str()),
            ("format_instruction", format_instruction.as_str()),
        ],
    )
}

/// Reflective answer over image + question + findings.
fn infer_answer(
    runner: &mut StageRunner<'_>,
    chain: &VisualInferenceChain,
    rationale: &RationaleSet,
) -> Result<String, PipelineError> {
    let ctx = runner.ctx;
    let prompt = answer_prompt(ctx.templates, ctx.config, runner.item, chain, rationale);
    let executor = ctx.config.executor.clone();
    runner.call(StageName::Answer, &executor, prompt, true)
}

fn baseline_prompt(templates: &PromptTemplateSet, item: &BenchmarkItem, cot: bool) -> String {
    let block = item.question_block();
    if cot {
        let rendered = render_template(&templates.cot, &[("question", block.as_str())]);
        format!("{rendered}\n\n{}", format_hint(item.qtype))
    } else {
        format!("{block}\n\n{}", format_hint(item.qtype))
    }
}

/// Normalize the raw answer, falling back to the model extractor when rules
/// fail. The extractor call shows up as an extra `answer` stage.
fn finalize_answer(runner: &mut StageRunner<'_>, raw_answer: &str) -> String {
    let item = runner.item;
    let options = item.options.clone();
    let parsed = rule_extract(raw_answer, item.qtype, options.as_deref());
    if parsed != UNPARSEABLE {
        return parsed;
    }
    let Some(extractor) = runner.ctx.config.extractor.clone() else {
        return parsed;
    };
    let templates = runner.ctx.templates;
    let outcome = model_extract(
        raw_answer,
        item.qtype,
        options.as_deref(),
        templates,
        |prompt| match runner.call(StageName::Answer, &extractor, prompt, false) {
            Ok(text) => Ok(text),
            Err(e) => Err(e.to_string()),
        },
    );
    debug_assert!(
        (outcome.method == ExtractionMethod::None) == (outcome.parsed == UNPARSEABLE),
        "extraction method must reflect parse success"
    );
    outcome.parsed
}

struct StagePlan {
    chain: Option<VisualInferenceChain>,
    rationale: Option<RationaleSet>,
    raw_answer: String,
}

fn run_method(
    runner: &mut StageRunner<'_>,
    plan_out: &mut StagePlan,
) -> Result<(), PipelineError> {
    let ctx = runner.ctx;
    let item = runner.item;
    match ctx.config.method {
        Method::Direct => {
            let prompt = baseline_prompt(ctx.templates, item, false);
            let executor = ctx.config.executor.clone();
            plan_out.raw_answer = runner.call(StageName::Baseline, &executor, prompt, true)?;
        }
        Method::Cot => {
            let prompt = baseline_prompt(ctx.templates, item, true);
            let executor = ctx.config.executor.clone();
            plan_out.raw_answer = runner.call(StageName::Baseline, &executor, prompt, true)?;
        }
        Method::Vic | Method::VicMultistep => {
            let chain = generate_chain(
                runner,
                ctx.templates,
                &ctx.config.generator,
                &item.question_block(),
            )?;
            plan_out.chain = Some(chain.clone());
            let rationale = if ctx.config.method == Method::Vic {
                extract_single(runner, &chain)?
            } else {
                extract_multistep(runner, &chain)?
            };
            plan_out.rationale = Some(rationale.clone());
            plan_out.raw_answer = infer_answer(runner, &chain, &rationale)?;
        }
    }
    Ok(())
}

/// Run one item end to end. Failures never escape: a failed stage yields a
/// record with the partial transcript, an unparsed answer, and the error.
pub fn run_item(ctx: &PipelineContext<'_>, item: &BenchmarkItem) -> RunRecord {
    let mut runner = StageRunner::new(ctx, item);
    let mut plan = StagePlan {
        chain: None,
        rationale: None,
        raw_answer: String::new(),
    };
    let error = run_method(&mut runner, &mut plan).err();
    let (parsed_answer, correct) = match &error {
        Some(_) => (UNPARSEABLE.to_string(), false),
        None => {
            let parsed = finalize_answer(&mut runner, &plan.raw_answer);
            let correct = judge_correct(item, &parsed);
            (parsed, correct)
        }
    };
    let timing_ms = runner.timing();
    RunRecord {
        item_id: item.id.clone(),
        method: ctx.config.method,
        stages: runner.stages,
        chain: plan.chain,
        rationale: plan.rationale,
        raw_answer: plan.raw_answer,
        parsed_answer,
        correct,
        usage: runner.usage,
        timing_ms,
        error: error.map(|e| e.to_string()),
    }
}
