//! Single-image yes/no subset of an index that mixes text-only questions,
//! original figures, and human-edited figure variants. Edited variants are
//! the hard split; question/figure group ids drive the grouped accuracies.

use std::path::Path;

use serde_json::Value;

use crate::model::{Benchmark, BenchmarkItem, Difficulty, QType};

use super::{image_exists, io_err, parse_err, IngestError, IngestOutcome};

/// Index fields arrive as strings or numbers depending on export version.
fn text_field(entry: &Value, key: &str) -> Option<String> {
    match entry.get(key)? {
        Value::String(s) => Some(s.trim().to_string()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

/// `filename` may be a single path or a list; more than one means the
/// question spans two images, which this set excludes.
enum FileRef {
    None,
    One(String),
    Many,
}

fn file_ref(entry: &Value) -> FileRef {
    match entry.get("filename") {
        None | Some(Value::Null) => FileRef::None,
        Some(Value::String(s)) if s.trim().is_empty() => FileRef::None,
        Some(Value::String(s)) => FileRef::One(s.trim().trim_start_matches("./").to_string()),
        Some(Value::Array(a)) => {
            let paths: Vec<&str> = a.iter().filter_map(|v| v.as_str()).collect();
            match paths.len() {
                0 => FileRef::None,
                1 => FileRef::One(paths[0].trim().trim_start_matches("./").to_string()),
                _ => FileRef::Many,
            }
        }
        Some(_) => FileRef::None,
    }
}

fn difficulty_of(visual_input: Option<&str>, image_rel: &str) -> Difficulty {
    match visual_input {
        Some("2") => Difficulty::Hard,
        Some("1") => Difficulty::Easy,
        // no usable flag: figure files follow <set>_<variant>.<ext>, variant 0
        // being the unedited original
        _ => {
            let stem = Path::new(image_rel)
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("");
            if stem.ends_with("_0") {
                Difficulty::Easy
            } else {
                Difficulty::Hard
            }
        }
    }
}

/// Layout: `HallusionBench.json` (array of question records) beside the
/// figure folders its `filename` fields point into.
pub fn ingest_hallusion(source: &Path) -> Result<IngestOutcome, IngestError> {
    let index_path = source.join("HallusionBench.json");
    if !index_path.is_file() {
        return Err(IngestError::Layout(format!(
            "{}: HallusionBench.json not found",
            source.display()
        )));
    }
    let text = std::fs::read_to_string(&index_path).map_err(|e| io_err(&index_path, e))?;
    let entries: Vec<Value> =
        serde_json::from_str(&text).map_err(|e| parse_err(&index_path, e.to_string()))?;

    let mut out = IngestOutcome::new(Benchmark::Hallusionbench, source);
    for (i, entry) in entries.iter().enumerate() {
        let category = text_field(entry, "category").unwrap_or_default();
        let subcategory = text_field(entry, "subcategory").unwrap_or_default();
        let set_id = text_field(entry, "set_id").unwrap_or_default();
        let fig = text_field(entry, "figure_id").unwrap_or_default();
        let qid = text_field(entry, "question_id").unwrap_or_default();
        let source_id = if category.is_empty() && set_id.is_empty() {
            format!("entry {i}")
        } else {
            format!("{category}/{subcategory}/{set_id}/{fig}/{qid}")
        };

        let visual_input = text_field(entry, "visual_input");
        if visual_input.as_deref() == Some("0") {
            out.skip(&source_id, "text_only");
            continue;
        }
        let image_rel = match file_ref(entry) {
            FileRef::Many => {
                out.skip(&source_id, "two_image");
                continue;
            }
            FileRef::None => {
                // no flag and no file: nothing to look at
                if visual_input.is_none() {
                    out.skip(&source_id, "text_only");
                } else {
                    out.skip(&source_id, "missing_image");
                }
                continue;
            }
            FileRef::One(p) => p,
        };
        let Some(question) = text_field(entry, "question").filter(|q| !q.is_empty()) else {
            out.skip(&source_id, "missing question");
            continue;
        };
        let gold = match text_field(entry, "gt_answer").as_deref() {
            Some("1") | Some("yes") | Some("Yes") => "yes",
            Some("0") | Some("no") | Some("No") => "no",
            other => {
                out.skip(&source_id, format!("unrecognized gt_answer {other:?}"));
                continue;
            }
        };
        if !image_exists(source, &image_rel) {
            out.skip(&source_id, "missing_image");
            continue;
        }
        let difficulty = difficulty_of(visual_input.as_deref(), &image_rel);
        let slug = format!(
            "{}_{}_s{}",
            category.to_ascii_lowercase(),
            subcategory.to_ascii_lowercase(),
            set_id
        );
        out.emit(BenchmarkItem {
            id: format!("hb_{slug}_f{fig}_q{qid}"),
            benchmark: Benchmark::Hallusionbench,
            image_ref: Some(image_rel),
            question,
            qtype: QType::Yorn,
            options: None,
            gold: gold.into(),
            category: Some(subcategory.to_ascii_lowercase()),
            subtask: None,
            // same question asked over each figure variant
            pair_id: Some(format!("{slug}_q{qid}")),
            // all questions about one figure variant
            figure_id: Some(format!("{slug}_f{fig}")),
            difficulty: Some(difficulty),
        });
    }
    Ok(out)
}
