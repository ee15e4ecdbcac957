//! Yes/no perception+cognition suite: one directory per subtask, two
//! tab-separated questions per image. Ships in two flavors — either
//! `questions_answers_YN/` + `images/` subfolders, or question files
//! sitting next to their images.

use std::path::{Path, PathBuf};

use crate::model::{Benchmark, BenchmarkItem, QType};

use super::{io_err, IngestError, IngestOutcome};

const IMAGE_EXTS: [&str; 6] = ["jpg", "jpeg", "png", "gif", "bmp", "webp"];

fn image_for(base_dir: &Path, stem: &str) -> Option<PathBuf> {
    for ext in IMAGE_EXTS {
        for candidate in [format!("{stem}.{ext}"), format!("{stem}.{}", ext.to_uppercase())] {
            let p = base_dir.join(&candidate);
            if p.is_file() {
                return Some(p);
            }
        }
    }
    None
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, IngestError> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| io_err(dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .collect();
    entries.sort();
    Ok(entries)
}

fn rel_to<'a>(root: &Path, path: &'a Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .to_string_lossy()
        .replace('\\', "/")
}

/// Layout: `source/<subtask>/…` directories; each question file holds
/// `question<TAB>Yes|No` lines (normally two) keyed to an image of the
/// same stem.
pub fn ingest_mme(source: &Path) -> Result<IngestOutcome, IngestError> {
    let mut out = IngestOutcome::new(Benchmark::Mme, source);
    let mut saw_questions = false;

    let mut subtask_dirs: Vec<PathBuf> = sorted_entries(source)?
        .into_iter()
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| !n.starts_with('.'))
        })
        .collect();
    subtask_dirs.sort();

    for dir in subtask_dirs {
        let subtask = dir
            .file_name()
            .unwrap()
            .to_string_lossy()
            .to_ascii_lowercase();
        let qa_dir = dir.join("questions_answers_YN");
        let (txt_dir, img_dir) = if qa_dir.is_dir() {
            (qa_dir, dir.join("images"))
        } else {
            (dir.clone(), dir.clone())
        };
        for txt_path in sorted_entries(&txt_dir)? {
            if txt_path.extension().and_then(|e| e.to_str()) != Some("txt") {
                continue;
            }
            saw_questions = true;
            let stem = txt_path.file_stem().unwrap().to_string_lossy().to_string();
            let text = std::fs::read_to_string(&txt_path).map_err(|e| io_err(&txt_path, e))?;
            let image = image_for(&img_dir, &stem);
            for (lineno, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let source_id = format!("{subtask}/{stem}#{}", lineno + 1);
                let Some(image_path) = image.as_ref() else {
                    out.skip(&source_id, "missing_image");
                    continue;
                };
                let Some((question, answer)) = line.split_once('\t') else {
                    out.skip(&source_id, "no tab separator");
                    continue;
                };
                let gold = answer.trim().to_ascii_lowercase();
                if gold != "yes" && gold != "no" {
                    out.skip(&source_id, format!("unrecognized answer {:?}", answer.trim()));
                    continue;
                }
                out.emit(BenchmarkItem {
                    id: format!("mme_{subtask}_{stem}_{}", lineno + 1),
                    benchmark: Benchmark::Mme,
                    image_ref: Some(rel_to(source, image_path)),
                    question: question.trim().to_string(),
                    qtype: QType::Yorn,
                    options: None,
                    gold,
                    category: None,
                    subtask: Some(subtask.clone()),
                    pair_id: None,
                    figure_id: None,
                    difficulty: None,
                });
            }
        }
    }
    if !saw_questions {
        return Err(IngestError::Layout(format!(
            "{}: no <subtask>/*.txt question files found",
            source.display()
        )));
    }
    Ok(out)
}
