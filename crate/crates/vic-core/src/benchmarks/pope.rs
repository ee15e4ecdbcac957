//! Object-presence probes built with the adversarial negative-sampling
//! strategy: JSON-lines index over a COCO image folder, first 1000 kept.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::model::{Benchmark, BenchmarkItem, QType};

use super::{io_err, parse_err, IngestError, IngestOutcome};

pub(crate) const POPE_SUBSET: usize = 1000;

#[derive(Deserialize)]
struct PopeLine {
    question_id: u64,
    image: String,
    text: String,
    label: String,
}

fn find_index(source: &Path) -> Result<PathBuf, IngestError> {
    let preferred = source.join("coco_pope_adversarial.json");
    if preferred.is_file() {
        return Ok(preferred);
    }
    let mut candidates: Vec<PathBuf> = std::fs::read_dir(source)
        .map_err(|e| io_err(source, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.is_file()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.contains("adversarial") && n.contains(".json"))
        })
        .collect();
    candidates.sort();
    candidates.into_iter().next().ok_or_else(|| {
        IngestError::Layout(format!(
            "{}: no adversarial index (coco_pope_adversarial.json) found",
            source.display()
        ))
    })
}

fn locate_image(source: &Path, image: &str) -> Option<String> {
    for prefix in ["", "images", "val2014", "COCO"] {
        let rel = if prefix.is_empty() {
            image.to_string()
        } else {
            format!("{prefix}/{image}")
        };
        if source.join(&rel).is_file() {
            return Some(rel);
        }
    }
    None
}

/// Layout: an `*adversarial*.json` JSON-lines index
/// (`{question_id, image, text, label}` per line) beside its image folder.
pub fn ingest_pope(source: &Path) -> Result<IngestOutcome, IngestError> {
    let index_path = find_index(source)?;
    let text = std::fs::read_to_string(&index_path).map_err(|e| io_err(&index_path, e))?;

    let mut out = IngestOutcome::new(Benchmark::PopeAdv, source);
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parsed: PopeLine = match serde_json::from_str(line) {
            Ok(v) => v,
            Err(e) => {
                return Err(parse_err(&index_path, format!("line {}: {e}", lineno + 1)));
            }
        };
        let source_id = parsed.question_id.to_string();
        if out.items.len() >= POPE_SUBSET {
            out.skip(&source_id, "beyond_subset");
            continue;
        }
        let label = parsed.label.trim().to_ascii_lowercase();
        if label != "yes" && label != "no" {
            out.skip(&source_id, format!("unrecognized label {:?}", parsed.label));
            continue;
        }
        let Some(image_rel) = locate_image(source, &parsed.image) else {
            out.skip(&source_id, "missing_image");
            continue;
        };
        out.emit(BenchmarkItem {
            id: format!("pope_{:04}", parsed.question_id),
            benchmark: Benchmark::PopeAdv,
            image_ref: Some(image_rel),
            question: parsed.text.trim().to_string(),
            qtype: QType::Yorn,
            options: None,
            gold: label,
            category: None,
            subtask: None,
            pair_id: None,
            figure_id: None,
            difficulty: None,
        });
    }
    Ok(out)
}
