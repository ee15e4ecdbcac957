//! Thinking-before-looking inference pipelines for multimodal models.
//!
//! The crate is organized around the lifecycle of an evaluation run:
//!
//! - [`model`] — benchmark items, prompts, chains, and run records
//! - [`providers`] — backends, throttling, retries, and the response cache
//! - [`pipeline`] — the direct / chain-of-thought / inference-chain methods
//! - [`extract`] — answer normalization and correctness judging
//! - [`benchmarks`] — adapters from native dataset layouts plus synthesis
//! - [`metrics`] — scoring and cross-run comparison

pub mod benchmarks;
pub mod extract;
pub mod metrics;
pub mod model;
pub mod pipeline;
pub mod providers;

pub use benchmarks::{make_synthetic, synth_mock_script, IngestManifest, IngestOutcome};
pub use model::{
    Benchmark, BenchmarkItem, Difficulty, Method, MethodConfig, ModelRef, PromptTemplateSet,
    QType, RationaleSet, RunRecord, Sampling, StageName, StageRecord, Timing, Usage,
    VisualInferenceChain, UNPARSEABLE,
};
pub use providers::{
    MessagePart, ModelRequest, ModelResponse, ProviderConfig, ProviderError, ProviderPool,
    ResponseCache,
};
