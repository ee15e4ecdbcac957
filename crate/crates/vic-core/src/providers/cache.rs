//! Content-addressed response cache.
//!
//! Entries are keyed by the canonical request digest and stored as
//! `<dir>/<first two hex chars>/<digest>.json`. Writes go through a
//! temp file in the same directory plus an atomic rename, so a reader
//! never observes a half-written entry; anything unreadable or
//! inconsistent is treated as a miss.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use super::FinishReason;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub request_digest: String,
    pub model_id: String,
    pub text: String,
    pub finish: FinishReason,
    pub created_unix_ms: u64,
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        ResponseCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn entry_path(&self, digest: &str) -> PathBuf {
        self.dir.join(&digest[..2]).join(format!("{digest}.json"))
    }

    /// Look up a digest. Missing, unparseable, or mismatched entries are
    /// all misses; a corrupt cache degrades performance, not correctness.
    pub fn get(&self, digest: &str) -> Option<CacheEntry> {
        let bytes = std::fs::read(self.entry_path(digest)).ok()?;
        let entry: CacheEntry = serde_json::from_slice(&bytes).ok()?;
        if entry.request_digest != digest {
            return None;
        }
        Some(entry)
    }

    /// Persist an entry. Failures are returned but callers may treat the
    /// cache as best-effort.
    pub fn put(&self, entry: &CacheEntry) -> std::io::Result<()> {
        let path = self.entry_path(&entry.request_digest);
        let parent = path.parent().expect("entry path has a parent");
        std::fs::create_dir_all(parent)?;
        let mut tmp = tempfile::NamedTempFile::new_in(parent)?;
        tmp.write_all(&serde_json::to_vec(entry).expect("entry serializes"))?;
        tmp.flush()?;
        tmp.persist(&path).map_err(|e| e.error)?;
        Ok(())
    }

    pub fn make_entry(digest: &str, model_id: &str, text: &str, finish: FinishReason) -> CacheEntry {
        CacheEntry {
            request_digest: digest.to_string(),
            model_id: model_id.to_string(),
            text: text.to_string(),
            finish,
            created_unix_ms: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0),
        }
    }
}
