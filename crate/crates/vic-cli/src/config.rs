//! Run configuration: a TOML experiment manifest.
//!
//! Paths inside the file resolve relative to the file's own directory, so
//! manifests can be checked in next to their data. `VIC_CACHE_DIR`
//! overrides `cache_dir` at execution time.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vic_core::model::{
    canonical_digest, default_templates, validate_templates, MethodConfig, PromptTemplateSet,
};
use vic_core::providers::{ProviderConfig, ProviderKind, CACHE_DIR_ENV};

pub const MAX_PARALLELISM: usize = 64;

fn default_parallelism() -> usize {
    1
}

/// Optional per-template overrides; anything unset falls back to the
/// built-in prompt wording.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PromptOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vic_generation: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cot: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extraction: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reflection: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extraction_answer: Option<String>,
}

impl PromptOverrides {
    fn apply(&self, mut base: PromptTemplateSet) -> PromptTemplateSet {
        if let Some(t) = &self.vic_generation {
            base.vic_generation = t.clone();
        }
        if let Some(t) = &self.cot {
            base.cot = t.clone();
        }
        if let Some(t) = &self.extraction {
            base.extraction = t.clone();
        }
        if let Some(t) = &self.reflection {
            base.reflection = t.clone();
        }
        if let Some(t) = &self.extraction_answer {
            base.extraction_answer = t.clone();
        }
        base
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub run_id: String,
    pub items_path: PathBuf,
    pub method: MethodConfig,
    pub providers: Vec<ProviderConfig>,
    #[serde(default = "default_parallelism")]
    pub parallelism: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Head-N cutoff for smoke runs.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub limit: Option<usize>,
    /// Script applied to every mock provider that has no script of its own.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mock_script: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub prompt_sets: BTreeMap<String, PromptOverrides>,
}

fn resolve(base: &Path, path: &mut PathBuf) {
    if path.is_relative() {
        *path = base.join(&*path);
    }
}

fn fs_safe(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl RunConfig {
    /// Parse and validate a manifest, resolving its paths against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<RunConfig, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("{}: {e}", path.display()))?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
        resolve(&base, &mut config.items_path);
        resolve(&base, &mut config.out_dir);
        if let Some(dir) = &mut config.cache_dir {
            resolve(&base, dir);
        }
        if let Some(script) = &mut config.mock_script {
            resolve(&base, script);
        }
        for provider in &mut config.providers {
            if let Some(script) = &mut provider.script {
                resolve(&base, script);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), String> {
        if !fs_safe(&self.run_id) {
            return Err(format!(
                "run_id {:?} must be 1-128 chars of [A-Za-z0-9._-] and not start with '.'",
                self.run_id
            ));
        }
        if self.parallelism == 0 || self.parallelism > MAX_PARALLELISM {
            return Err(format!(
                "parallelism must be 1..={MAX_PARALLELISM}, got {}",
                self.parallelism
            ));
        }
        if self.limit == Some(0) {
            return Err("limit must be >= 1 when set".into());
        }
        self.method.validate()?;
        if self.providers.is_empty() {
            return Err("at least one [[providers]] entry is required".into());
        }
        let mut seen = std::collections::HashSet::new();
        for provider in &self.providers {
            provider.validate()?;
            if !seen.insert(provider.id.as_str()) {
                return Err(format!("duplicate provider id {:?}", provider.id));
            }
            if provider.kind == ProviderKind::Mock
                && provider.script.is_none()
                && self.mock_script.is_none()
            {
                return Err(format!(
                    "mock provider {:?} needs a script (provider script or top-level mock_script)",
                    provider.id
                ));
            }
        }
        let mut roles = vec![
            ("method.generator", &self.method.generator),
            ("method.executor", &self.method.executor),
        ];
        if let Some(extractor) = &self.method.extractor {
            roles.push(("method.extractor", extractor));
        }
        for (role, model) in roles {
            if !seen.contains(model.provider.as_str()) {
                return Err(format!(
                    "{role} references provider {:?} which is not configured",
                    model.provider
                ));
            }
        }
        if self.method.prompt_set != "default"
            && !self.prompt_sets.contains_key(&self.method.prompt_set)
        {
            return Err(format!(
                "method.prompt_set {:?} has no [prompt_sets.{}] section",
                self.method.prompt_set, self.method.prompt_set
            ));
        }
        let templates = self.resolved_templates();
        validate_templates(&templates).map_err(|e| e.to_string())?;
        Ok(())
    }

    pub fn resolved_templates(&self) -> PromptTemplateSet {
        let base = default_templates();
        match self.prompt_sets.get(&self.method.prompt_set) {
            Some(overrides) => overrides.apply(base),
            None => base,
        }
    }

    pub fn run_dir(&self) -> PathBuf {
        self.out_dir.join(&self.run_id)
    }

    /// Cache directory, in precedence order: `VIC_CACHE_DIR` env,
    /// `cache_dir` field, `<out_dir>/cache`.
    pub fn effective_cache_dir(&self) -> PathBuf {
        if let Ok(dir) = std::env::var(CACHE_DIR_ENV) {
            if !dir.is_empty() {
                return PathBuf::from(dir);
            }
        }
        self.cache_dir
            .clone()
            .unwrap_or_else(|| self.out_dir.join("cache"))
    }

    /// Identity of the run for resume checks. Scheduling knobs
    /// (parallelism, limit) and cache location are excluded: they change
    /// how much work happens, never what the records contain.
    pub fn identity_digest(&self) -> String {
        canonical_digest(&serde_json::json!({
            "run_id": self.run_id,
            "items_path": self.items_path.display().to_string(),
            "method": self.method,
            "providers": self.providers,
            "mock_script": self.mock_script.as_ref().map(|p| p.display().to_string()),
            "prompt_sets": self.prompt_sets,
        }))
    }
}
