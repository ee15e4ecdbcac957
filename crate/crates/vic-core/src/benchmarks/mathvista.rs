//! 1000-question visual-math evaluation slice. Questions are a mix of
//! multiple-choice and free-form; the first annotated reasoning skill
//! becomes the report category.

use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use crate::model::{Benchmark, BenchmarkItem, QType};

use super::{image_exists, io_err, parse_err, IngestError, IngestOutcome};

fn skill_category(skill: &str) -> String {
    match skill.to_ascii_lowercase().as_str() {
        "logical reasoning" => "LR".into(),
        "arithmetic reasoning" => "AR".into(),
        "geometry reasoning" => "GR".into(),
        "statistical reasoning" => "SR".into(),
        "algebraic reasoning" => "ALR".into(),
        "scientific reasoning" => "SCR".into(),
        "numeric commonsense" => "NC".into(),
        _ => skill.to_string(),
    }
}

#[derive(Deserialize)]
struct MathVistaRecord {
    question: String,
    #[serde(default)]
    image: Option<String>,
    #[serde(default)]
    choices: Option<Vec<Value>>,
    answer: Value,
    #[serde(default)]
    question_type: Option<String>,
    #[serde(default)]
    metadata: Option<Metadata>,
}

#[derive(Deserialize)]
struct Metadata {
    #[serde(default)]
    skills: Vec<String>,
}

fn value_text(v: &Value) -> String {
    match v {
        Value::String(s) => s.trim().to_string(),
        other => other.to_string(),
    }
}

fn ingest_record(
    out: &mut IngestOutcome,
    source: &Path,
    source_id: &str,
    record: MathVistaRecord,
) {
    let Some(image) = record.image.filter(|p| !p.trim().is_empty()) else {
        out.skip(source_id, "no image reference");
        return;
    };
    let image_rel = image.trim().trim_start_matches("./").to_string();
    if !image_exists(source, &image_rel) {
        out.skip(source_id, "missing_image");
        return;
    }
    let answer = value_text(&record.answer);
    let choices: Option<Vec<String>> = record
        .choices
        .as_ref()
        .filter(|c| !c.is_empty())
        .map(|c| c.iter().map(value_text).collect());
    let is_mcq = record
        .question_type
        .as_deref()
        .map(|t| t == "multi_choice")
        .unwrap_or_else(|| choices.is_some());
    let (qtype, options, gold) = if is_mcq {
        let Some(options) = choices else {
            out.skip(source_id, "multi_choice without choices");
            return;
        };
        // gold arrives as the choice text, not a letter
        let Some(idx) = options.iter().position(|c| c == &answer) else {
            out.skip(source_id, "gold not among choices");
            return;
        };
        (
            QType::Mcq,
            Some(options),
            BenchmarkItem::option_label(idx),
        )
    } else {
        (QType::Free, None, answer)
    };
    if gold.is_empty() {
        out.skip(source_id, "empty gold");
        return;
    }
    let category = record
        .metadata
        .as_ref()
        .and_then(|m| m.skills.first())
        .map(|s| skill_category(s));
    out.emit(BenchmarkItem {
        id: format!("mathvista_{source_id}"),
        benchmark: Benchmark::Mathvista,
        image_ref: Some(image_rel),
        question: record.question.trim().to_string(),
        qtype,
        options,
        gold,
        category,
        subtask: None,
        pair_id: None,
        figure_id: None,
        difficulty: None,
    });
}

/// Layout: `testmini.json` — either `{pid: record}` or `[record]`, records
/// carrying `question, image, choices, answer, question_type,
/// metadata.skills` — beside the image folders it references.
pub fn ingest_mathvista(source: &Path) -> Result<IngestOutcome, IngestError> {
    let index_path = source.join("testmini.json");
    if !index_path.is_file() {
        return Err(IngestError::Layout(format!(
            "{}: testmini.json not found",
            source.display()
        )));
    }
    let text = std::fs::read_to_string(&index_path).map_err(|e| io_err(&index_path, e))?;
    let root: Value =
        serde_json::from_str(&text).map_err(|e| parse_err(&index_path, e.to_string()))?;

    let mut out = IngestOutcome::new(Benchmark::Mathvista, source);
    let records: Vec<(String, Value)> = match root {
        Value::Object(map) => {
            let mut pairs: Vec<(String, Value)> = map.into_iter().collect();
            // object keys are numeric pids; keep dataset order
            pairs.sort_by_key(|(k, _)| k.parse::<u64>().unwrap_or(u64::MAX));
            pairs
        }
        Value::Array(list) => list
            .into_iter()
            .enumerate()
            .map(|(i, v)| {
                let pid = v
                    .get("pid")
                    .map(value_text)
                    .filter(|p| !p.is_empty())
                    .unwrap_or_else(|| (i + 1).to_string());
                (pid, v)
            })
            .collect(),
        _ => {
            return Err(parse_err(
                &index_path,
                "expected a JSON object or array of question records",
            ))
        }
    };
    for (pid, value) in records {
        match serde_json::from_value::<MathVistaRecord>(value) {
            Ok(record) => ingest_record(&mut out, source, &pid, record),
            Err(e) => out.skip(&pid, format!("malformed record: {e}")),
        }
    }
    Ok(out)
}
