//! Four-way multiple choice over nine image-grounded dimensions. The full
//! index is much larger than the evaluated slice, so a seeded sample of
//! 1000 image questions is drawn and the seed recorded in the manifest.

use std::collections::HashMap;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use crate::model::{Benchmark, BenchmarkItem, QType};

use super::{io_err, parse_err, IngestError, IngestOutcome};

pub const SEED_SAMPLE_SIZE: usize = 1000;

fn dimension_abbrev(name: &str) -> String {
    match name {
        "Scene Understanding" => "SU".into(),
        "Instance Identity" => "II".into(),
        "Instance Attributes" => "IA".into(),
        "Instance Location" => "ILoc".into(),
        "Instances Counting" => "ICount".into(),
        "Spatial Relation" => "SR".into(),
        "Instance Interaction" => "IntI".into(),
        "Visual Reasoning" => "VR".into(),
        "Text Understanding" => "TU".into(),
        other => other.to_string(),
    }
}

fn text_of(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.trim().to_string()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn locate_image(source: &Path, data_id: &str) -> Option<String> {
    for prefix in ["SEED-Bench-image", "", "images"] {
        let rel = if prefix.is_empty() {
            data_id.to_string()
        } else {
            format!("{prefix}/{data_id}")
        };
        if source.join(&rel).is_file() {
            return Some(rel);
        }
    }
    None
}

/// Layout: `SEED-Bench.json` with a `questions` array
/// (`choice_a..choice_d`, `answer` letter, `data_type`, `question_type_id`)
/// and a `question_type` name→id map; images resolved by `data_id`.
pub fn ingest_seed(source: &Path, sample_seed: u64) -> Result<IngestOutcome, IngestError> {
    let index_path = source.join("SEED-Bench.json");
    if !index_path.is_file() {
        return Err(IngestError::Layout(format!(
            "{}: SEED-Bench.json not found",
            source.display()
        )));
    }
    let text = std::fs::read_to_string(&index_path).map_err(|e| io_err(&index_path, e))?;
    let root: Value =
        serde_json::from_str(&text).map_err(|e| parse_err(&index_path, e.to_string()))?;
    let Some(questions) = root.get("questions").and_then(|q| q.as_array()) else {
        return Err(parse_err(&index_path, "missing \"questions\" array"));
    };
    let type_names: HashMap<u64, String> = root
        .get("question_type")
        .and_then(|m| m.as_object())
        .map(|m| {
            m.iter()
                .filter_map(|(name, id)| id.as_u64().map(|id| (id, name.clone())))
                .collect()
        })
        .unwrap_or_default();

    let mut out = IngestOutcome::new(Benchmark::Seedbench, source);
    out.manifest.sample_seed = Some(sample_seed);

    // first pass: everything that could be emitted, in index order
    let mut candidates: Vec<BenchmarkItem> = Vec::new();
    for (i, q) in questions.iter().enumerate() {
        let source_id = q
            .get("question_id")
            .and_then(text_of)
            .unwrap_or_else(|| format!("entry {i}"));
        if q.get("data_type").and_then(|v| v.as_str()) != Some("image") {
            out.skip(&source_id, "not_image");
            continue;
        }
        let Some(data_id) = q.get("data_id").and_then(text_of).filter(|d| !d.is_empty()) else {
            out.skip(&source_id, "missing data_id");
            continue;
        };
        let Some(image_rel) = locate_image(source, &data_id) else {
            out.skip(&source_id, "missing_image");
            continue;
        };
        let Some(question) = q.get("question").and_then(text_of).filter(|s| !s.is_empty())
        else {
            out.skip(&source_id, "missing question");
            continue;
        };
        let mut options = Vec::new();
        for key in ["choice_a", "choice_b", "choice_c", "choice_d"] {
            match q.get(key).and_then(text_of) {
                Some(c) if !c.is_empty() => options.push(c),
                _ => break,
            }
        }
        if options.len() < 2 {
            out.skip(&source_id, "fewer than 2 choices");
            continue;
        }
        let gold = q
            .get("answer")
            .and_then(text_of)
            .map(|a| a.to_ascii_uppercase())
            .unwrap_or_default();
        let in_range = gold.len() == 1
            && gold.as_bytes()[0] >= b'A'
            && ((gold.as_bytes()[0] - b'A') as usize) < options.len();
        if !in_range {
            out.skip(&source_id, format!("gold label {gold:?} out of range"));
            continue;
        }
        let category = q
            .get("question_type_id")
            .and_then(|v| v.as_u64().or_else(|| v.as_str().and_then(|s| s.parse().ok())))
            .and_then(|id| type_names.get(&id))
            .map(|name| dimension_abbrev(name));
        candidates.push(BenchmarkItem {
            id: format!("seed_{source_id}"),
            benchmark: Benchmark::Seedbench,
            image_ref: Some(image_rel),
            question,
            qtype: QType::Mcq,
            options: Some(options),
            gold,
            category,
            subtask: None,
            pair_id: None,
            figure_id: None,
            difficulty: None,
        });
    }

    // second pass: seeded sample, emitted in original index order
    if candidates.len() > SEED_SAMPLE_SIZE {
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
        let mut keep =
            rand::seq::index::sample(&mut rng, candidates.len(), SEED_SAMPLE_SIZE).into_vec();
        keep.sort_unstable();
        let keep_set: std::collections::HashSet<usize> = keep.into_iter().collect();
        for (i, item) in candidates.into_iter().enumerate() {
            if keep_set.contains(&i) {
                out.emit(item);
            } else {
                out.skip(&item.id, "not_sampled");
            }
        }
    } else {
        for item in candidates {
            out.emit(item);
        }
    }
    Ok(out)
}
