//! Run execution: N workers pull items from a shared queue, one writer
//! appends finished records. Records land in `records.jsonl` as they
//! complete; on success the file is rewritten sorted by item id, so final
//! artifacts do not depend on worker interleaving.
//!
//! Resume contract: rerunning the same manifest skips every item that
//! already has a record. A torn final line (crash mid-append) is detected
//! and dropped; torn earlier lines are corruption and abort.

use std::collections::{HashSet, VecDeque};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::sync::Mutex;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use vic_core::model::{read_items, validate_item, write_run_records, RunRecord};
use vic_core::pipeline::{run_item, PipelineContext};
use vic_core::providers::{
    load_mock, Backend, GeminiCompatible, OpenAiCompatible, ProviderKind, ProviderPool,
    ResponseCache, ScriptedMockBackend,
};

use crate::config::RunConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Progress {
    pub run_id: String,
    pub config_digest: String,
    pub total: u64,
    pub done: u64,
    pub failed: u64,
}

#[derive(Debug)]
pub struct RunSummary {
    pub done: u64,
    pub failed: u64,
    pub cache_hits: u64,
    pub records_path: PathBuf,
    /// Records produced by this invocation (not carried over by resume).
    pub new_records: u64,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).with_context(|| tmp.display().to_string())?;
    fs::rename(&tmp, path).with_context(|| path.display().to_string())?;
    Ok(())
}

fn write_progress(path: &Path, progress: &Progress) -> Result<()> {
    let mut body = serde_json::to_vec_pretty(progress)?;
    body.push(b'\n');
    write_atomic(path, &body)
}

/// Read back an interrupted `records.jsonl`. A parse failure on the final
/// non-blank line is a torn append and is dropped; anywhere else it is an
/// error.
pub fn salvage_records(path: &Path) -> Result<Vec<RunRecord>> {
    let text = fs::read_to_string(path).with_context(|| path.display().to_string())?;
    let lines: Vec<&str> = text.lines().collect();
    let last = lines.iter().rposition(|l| !l.trim().is_empty());
    let mut records = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RunRecord>(line) {
            Ok(record) => records.push(record),
            Err(_) if Some(i) == last => {
                eprintln!(
                    "warning: dropping torn final record at {}:{}",
                    path.display(),
                    i + 1
                );
            }
            Err(e) => bail!("{}: line {}: corrupt record: {e}", path.display(), i + 1),
        }
    }
    Ok(records)
}

fn build_pool(config: &RunConfig) -> Result<ProviderPool> {
    let mut pool = ProviderPool::new();
    for pcfg in &config.providers {
        let backend: std::sync::Arc<dyn Backend> = match pcfg.kind {
            ProviderKind::Mock => {
                let script_path = pcfg
                    .script
                    .clone()
                    .or_else(|| config.mock_script.clone())
                    .ok_or_else(|| anyhow!("mock provider {} has no script", pcfg.id))?;
                let script = load_mock(&script_path)?;
                std::sync::Arc::new(ScriptedMockBackend::new(script))
            }
            ProviderKind::OpenaiCompat => std::sync::Arc::new(OpenAiCompatible::new(
                pcfg.base_url.clone().unwrap_or_default(),
                pcfg.api_key_env(),
                pcfg.timeout_ms(),
            )),
            ProviderKind::GeminiCompat => std::sync::Arc::new(GeminiCompatible::new(
                pcfg.base_url.clone().unwrap_or_default(),
                pcfg.api_key_env(),
                pcfg.timeout_ms(),
            )),
        };
        pool.register(pcfg.clone(), backend);
    }
    Ok(pool)
}

pub fn execute_run(config: &RunConfig) -> Result<RunSummary> {
    let mut items = read_items(&config.items_path)?;
    for item in &items {
        validate_item(item)?;
    }
    {
        let mut seen = HashSet::new();
        for item in &items {
            if !seen.insert(item.id.as_str()) {
                bail!("items file has duplicate id {:?}", item.id);
            }
        }
    }
    if let Some(limit) = config.limit {
        items.truncate(limit);
    }

    let run_dir = config.run_dir();
    fs::create_dir_all(&run_dir).with_context(|| run_dir.display().to_string())?;
    let records_path = run_dir.join("records.jsonl");
    let progress_path = run_dir.join("progress.json");
    let digest = config.identity_digest();

    if progress_path.is_file() {
        let text = fs::read_to_string(&progress_path)?;
        let previous: Progress = serde_json::from_str(&text)
            .with_context(|| progress_path.display().to_string())?;
        if previous.config_digest != digest {
            bail!(
                "{} belongs to a different configuration (digest {} != {}); \
                 use a fresh run_id or out_dir",
                run_dir.display(),
                &previous.config_digest[..12],
                &digest[..12]
            );
        }
    }

    // resume: anything already recorded is done
    let resumed: Vec<RunRecord> = if records_path.is_file() {
        let salvaged = salvage_records(&records_path)?;
        // rewrite immediately so the file is clean before we append
        write_run_records(&records_path, &salvaged)?;
        salvaged
    } else {
        Vec::new()
    };
    let done_ids: HashSet<&str> = resumed.iter().map(|r| r.item_id.as_str()).collect();
    let pending: Vec<_> = items
        .iter()
        .filter(|i| !done_ids.contains(i.id.as_str()))
        .cloned()
        .collect();

    let pool = build_pool(config)?;
    let cache = ResponseCache::new(config.effective_cache_dir());
    let templates = config.resolved_templates();
    let image_root = config
        .items_path
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));

    let total = items.len() as u64;
    let failed_resumed = resumed.iter().filter(|r| r.error.is_some()).count() as u64;
    write_progress(
        &progress_path,
        &Progress {
            run_id: config.run_id.clone(),
            config_digest: digest.clone(),
            total,
            done: resumed.len() as u64,
            failed: failed_resumed,
        },
    )?;

    let mut new_records: Vec<RunRecord> = Vec::new();
    if !pending.is_empty() {
        let workers = config.parallelism.min(pending.len()).max(1);
        let queue = Mutex::new(VecDeque::from(pending));
        let (tx, rx) = mpsc::channel::<RunRecord>();

        let writer_out: Result<Vec<RunRecord>> = std::thread::scope(|scope| {
            let writer = scope.spawn(|| -> Result<Vec<RunRecord>> {
                let mut file = fs::OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(&records_path)
                    .with_context(|| records_path.display().to_string())?;
                let mut collected = Vec::new();
                let mut done = resumed.len() as u64;
                let mut failed = failed_resumed;
                for record in rx {
                    let mut line = serde_json::to_vec(&record)?;
                    line.push(b'\n');
                    file.write_all(&line)?;
                    file.flush()?;
                    done += 1;
                    if record.error.is_some() {
                        failed += 1;
                    }
                    write_progress(
                        &progress_path,
                        &Progress {
                            run_id: config.run_id.clone(),
                            config_digest: digest.clone(),
                            total,
                            done,
                            failed,
                        },
                    )?;
                    collected.push(record);
                }
                Ok(collected)
            });
            for _ in 0..workers {
                let tx = tx.clone();
                let queue = &queue;
                let ctx = PipelineContext {
                    pool: &pool,
                    cache: Some(&cache),
                    templates: &templates,
                    config: &config.method,
                    image_root: &image_root,
                };
                scope.spawn(move || {
                    loop {
                        let item = {
                            let mut q = queue.lock().expect("queue poisoned");
                            q.pop_front()
                        };
                        let Some(item) = item else { break };
                        let record = run_item(&ctx, &item);
                        if tx.send(record).is_err() {
                            break; // writer gone; nothing useful left to do
                        }
                    }
                });
            }
            drop(tx); // writer's channel closes once workers finish
            writer.join().map_err(|_| anyhow!("writer thread panicked"))?
        });
        new_records = writer_out?;
    }

    // finalize: stable order regardless of completion order
    let mut all = resumed;
    all.extend(new_records.iter().cloned());
    all.sort_by(|a, b| a.item_id.cmp(&b.item_id));
    all.dedup_by(|a, b| a.item_id == b.item_id);
    write_run_records(&records_path, &all)?;

    let failed = all.iter().filter(|r| r.error.is_some()).count() as u64;
    write_progress(
        &progress_path,
        &Progress {
            run_id: config.run_id.clone(),
            config_digest: digest,
            total,
            done: all.len() as u64,
            failed,
        },
    )?;
    Ok(RunSummary {
        done: all.len() as u64,
        failed,
        cache_hits: all.iter().map(|r| u64::from(r.usage.cache_hits)).sum(),
        records_path,
        new_records: new_records.len() as u64,
    })
}
