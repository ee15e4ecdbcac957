//! 300 paired multiple-choice questions; consecutive CSV rows form a pair
//! over two visually distinct images, scored all-or-nothing per pair.

use std::path::Path;
use std::sync::OnceLock;

use regex::Regex;

use crate::model::{Benchmark, BenchmarkItem, QType};

use super::{image_exists, parse_err, IngestError, IngestOutcome};

fn option_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"\(([a-zA-Z])\)\s*([^(]*)").unwrap())
}

/// Split `"(a) Yes (b) No"` into ordered option texts. Labels must start at
/// `(a)` and stay consecutive, otherwise the gold letter would not line up.
fn parse_options(raw: &str) -> Result<Vec<String>, String> {
    let mut options = Vec::new();
    for (i, cap) in option_re().captures_iter(raw).enumerate() {
        let letter = cap[1].to_ascii_lowercase().chars().next().unwrap();
        let expected = (b'a' + i as u8) as char;
        if letter != expected {
            return Err(format!("option {i} labeled ({letter}), expected ({expected})"));
        }
        options.push(cap[2].trim().trim_end_matches(',').trim().to_string());
    }
    if options.len() < 2 {
        return Err(format!("found {} option(s), need at least 2", options.len()));
    }
    Ok(options)
}

fn parse_gold(raw: &str) -> Option<String> {
    let trimmed = raw.trim();
    let inner = trimmed.strip_prefix('(')?.strip_suffix(')')?;
    let mut chars = inner.trim().chars();
    let letter = chars.next()?;
    if chars.next().is_some() || !letter.is_ascii_alphabetic() {
        return None;
    }
    Some(letter.to_ascii_uppercase().to_string())
}

/// Layout: `Questions.csv` with columns `Index, Question, Options,
/// Correct Answer`, images at `MMVP Images/<index>.jpg`. Rows `2k-1, 2k`
/// share a pair.
pub fn ingest_mmvp(source: &Path) -> Result<IngestOutcome, IngestError> {
    let csv_path = source.join("Questions.csv");
    if !csv_path.is_file() {
        return Err(IngestError::Layout(format!(
            "{}: Questions.csv not found",
            source.display()
        )));
    }
    let mut reader = csv::Reader::from_path(&csv_path).map_err(|e| IngestError::Parse {
        path: csv_path.display().to_string(),
        message: e.to_string(),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| parse_err(&csv_path, e.to_string()))?
        .clone();
    let col = |name: &str| -> Result<usize, IngestError> {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| parse_err(&csv_path, format!("missing column {name:?}")))
    };
    let idx_col = col("Index")?;
    let question_col = col("Question")?;
    let options_col = col("Options")?;
    let gold_col = col("Correct Answer")?;

    let mut out = IngestOutcome::new(Benchmark::Mmvp, source);
    for record in reader.records() {
        let record = record.map_err(|e| parse_err(&csv_path, e.to_string()))?;
        let field = |c: usize| record.get(c).unwrap_or("").trim().to_string();
        let source_id = field(idx_col);
        let index: u64 = match source_id.parse() {
            Ok(v) => v,
            Err(_) => {
                out.skip(&source_id, "non-numeric index");
                continue;
            }
        };
        let options = match parse_options(&field(options_col)) {
            Ok(v) => v,
            Err(reason) => {
                out.skip(&source_id, format!("bad options: {reason}"));
                continue;
            }
        };
        let Some(gold) = parse_gold(&field(gold_col)) else {
            out.skip(&source_id, "unrecognized gold label");
            continue;
        };
        let image_rel = format!("MMVP Images/{index}.jpg");
        if !image_exists(source, &image_rel) {
            out.skip(&source_id, "missing_image");
            continue;
        }
        out.emit(BenchmarkItem {
            id: format!("mmvp_{index:04}"),
            benchmark: Benchmark::Mmvp,
            image_ref: Some(image_rel),
            question: field(question_col),
            qtype: QType::Mcq,
            options: Some(options),
            gold,
            category: None,
            subtask: None,
            // rows 1,2 -> pair 1; rows 3,4 -> pair 2; ...
            pair_id: Some(format!("pair_{:04}", index.div_ceil(2))),
            figure_id: None,
            difficulty: None,
        });
    }
    Ok(out)
}
