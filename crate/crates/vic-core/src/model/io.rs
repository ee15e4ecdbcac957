//! JSONL readers/writers for item sets and run records.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

use super::{BenchmarkItem, RunRecord};

#[derive(Debug, Error)]
pub enum JsonlError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {source}")]
    Parse {
        path: String,
        line: usize,
        #[source]
        source: serde_json::Error,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> JsonlError {
    JsonlError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Read one value per non-empty line. Parse failures carry the 1-based line.
pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, JsonlError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let reader = BufReader::new(file);
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(&line).map_err(|e| JsonlError::Parse {
            path: path.display().to_string(),
            line: idx + 1,
            source: e,
        })?;
        out.push(value);
    }
    Ok(out)
}

/// Write one compact JSON value per line, replacing any existing file.
pub fn write_jsonl<T: Serialize>(path: &Path, values: &[T]) -> Result<(), JsonlError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| io_err(path, e))?;
        }
    }
    let file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut writer = BufWriter::new(file);
    for value in values {
        let line = serde_json::to_string(value).expect("values serialize");
        writer.write_all(line.as_bytes()).map_err(|e| io_err(path, e))?;
        writer.write_all(b"\n").map_err(|e| io_err(path, e))?;
    }
    writer.flush().map_err(|e| io_err(path, e))
}

pub fn read_items(path: &Path) -> Result<Vec<BenchmarkItem>, JsonlError> {
    read_jsonl(path)
}

pub fn write_items(path: &Path, items: &[BenchmarkItem]) -> Result<(), JsonlError> {
    write_jsonl(path, items)
}

pub fn read_run_records(path: &Path) -> Result<Vec<RunRecord>, JsonlError> {
    read_jsonl(path)
}

pub fn write_run_records(path: &Path, records: &[RunRecord]) -> Result<(), JsonlError> {
    write_jsonl(path, records)
}
