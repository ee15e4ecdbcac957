//! Scripted offline backend.
//!
//! A mock script maps `(item_id, stage)` to a fixed response, with an
//! optional fallback template. Requests must carry a routing tag; this is
//! what lets a whole multi-stage run replay deterministically with no
//! network access.

use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::StageName;

use super::{Backend, BackendError, BackendResponse, FinishReason, ModelRequest};

/// Env var: when set, every scripted-mock invocation appends one
/// `item_id<TAB>stage` line to the named file. Lets tests count backend
/// calls across process boundaries.
pub const MOCK_CALL_LOG_ENV: &str = "VIC_MOCK_CALL_LOG";

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScriptEntry {
    item_id: String,
    stage: String,
    text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ScriptFile {
    entries: Vec<ScriptEntry>,
    #[serde(default)]
    default: Option<String>,
}

#[derive(Debug, Error)]
pub enum MockScriptError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("entry {index}: unknown stage {stage:?}")]
    UnknownStage { index: usize, stage: String },
    #[error("entry {index}: duplicate entry for item {item_id:?} stage {stage}")]
    Duplicate {
        index: usize,
        item_id: String,
        stage: StageName,
    },
}

/// Scripted responses keyed by `(item_id, stage)`.
#[derive(Debug, Clone, Default)]
pub struct MockScript {
    entries: HashMap<(String, StageName), String>,
    default: Option<String>,
}

impl MockScript {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_default(template: impl Into<String>) -> Self {
        MockScript {
            entries: HashMap::new(),
            default: Some(template.into()),
        }
    }

    pub fn insert(&mut self, item_id: impl Into<String>, stage: StageName, text: impl Into<String>) {
        self.entries.insert((item_id.into(), stage), text.into());
    }

    pub fn set_default(&mut self, template: impl Into<String>) {
        self.default = Some(template.into());
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Resolve a response for `(item_id, stage)`, falling back to the
    /// default template with `{item_id}` / `{stage}` substituted.
    pub fn lookup(&self, item_id: &str, stage: StageName) -> Option<String> {
        if let Some(text) = self.entries.get(&(item_id.to_string(), stage)) {
            return Some(text.clone());
        }
        self.default.as_ref().map(|t| {
            t.replace("{item_id}", item_id)
                .replace("{stage}", stage.as_str())
        })
    }

    pub fn to_file(&self) -> String {
        let mut entries: Vec<ScriptEntry> = self
            .entries
            .iter()
            .map(|((item_id, stage), text)| ScriptEntry {
                item_id: item_id.clone(),
                stage: stage.as_str().to_string(),
                text: text.clone(),
            })
            .collect();
        entries.sort_by(|a, b| (&a.item_id, &a.stage).cmp(&(&b.item_id, &b.stage)));
        serde_json::to_string_pretty(&ScriptFile {
            entries,
            default: self.default.clone(),
        })
        .expect("script serializes")
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                std::fs::create_dir_all(parent)?;
            }
        }
        std::fs::write(path, self.to_file())
    }
}

/// Load and validate a mock script file.
pub fn load_mock(path: &Path) -> Result<MockScript, MockScriptError> {
    let text = std::fs::read_to_string(path).map_err(|e| MockScriptError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let file: ScriptFile = serde_json::from_str(&text).map_err(|e| MockScriptError::Parse {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut script = MockScript {
        entries: HashMap::new(),
        default: file.default,
    };
    for (index, entry) in file.entries.into_iter().enumerate() {
        let stage = StageName::parse(&entry.stage).ok_or_else(|| MockScriptError::UnknownStage {
            index,
            stage: entry.stage.clone(),
        })?;
        let key = (entry.item_id.clone(), stage);
        if script.entries.contains_key(&key) {
            return Err(MockScriptError::Duplicate {
                index,
                item_id: entry.item_id,
                stage,
            });
        }
        script.entries.insert(key, entry.text);
    }
    Ok(script)
}

/// Deterministic backend that answers only from a [`MockScript`].
pub struct ScriptedMockBackend {
    script: MockScript,
}

impl ScriptedMockBackend {
    pub fn new(script: MockScript) -> Self {
        ScriptedMockBackend { script }
    }
}

fn log_call(item_id: &str, stage: StageName) {
    let Ok(path) = std::env::var(MOCK_CALL_LOG_ENV) else {
        return;
    };
    if path.is_empty() {
        return;
    }
    if let Ok(mut f) = std::fs::OpenOptions::new().create(true).append(true).open(&path) {
        let _ = writeln!(f, "{item_id}\t{stage}");
    }
}

impl Backend for ScriptedMockBackend {
    fn invoke(&self, req: &ModelRequest) -> Result<BackendResponse, BackendError> {
        let tag = req.tag.as_ref().ok_or_else(|| {
            BackendError::Fatal("scripted mock requires a tagged request".to_string())
        })?;
        log_call(&tag.item_id, tag.stage);
        match self.script.lookup(&tag.item_id, tag.stage) {
            Some(text) => Ok(BackendResponse {
                text,
                finish: FinishReason::Stop,
            }),
            None => Err(BackendError::MockMissing {
                item_id: tag.item_id.clone(),
                stage: tag.stage,
            }),
        }
    }
}
