//! Benchmark adapters: native dataset layouts in, normalized items out.
//!
//! Every adapter returns the emitted items plus a manifest recording what
//! was skipped and why, so `emitted + skipped == scanned` is auditable.
//! [`make_synthetic`] builds small self-contained item sets (with
//! placeholder images) shaped like each benchmark, for offline runs.

mod hallusion;
mod mathvista;
mod mme;
mod mmvp;
mod pope;
mod seed;

pub use hallusion::ingest_hallusion;
pub use mathvista::ingest_mathvista;
pub use mme::ingest_mme;
pub use mmvp::ingest_mmvp;
pub use pope::ingest_pope;
pub use seed::{ingest_seed, SEED_SAMPLE_SIZE};

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Benchmark, BenchmarkItem, Difficulty, QType, StageName};
use crate::providers::MockScript;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{0}")]
    Layout(String),
}

pub(crate) fn io_err(path: &Path, source: std::io::Error) -> IngestError {
    IngestError::Io {
        path: path.display().to_string(),
        source,
    }
}

pub(crate) fn parse_err(path: &Path, message: impl Into<String>) -> IngestError {
    IngestError::Parse {
        path: path.display().to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedEntry {
    pub source_id: String,
    pub reason: String,
}

/// Audit trail for one ingestion pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IngestManifest {
    pub benchmark: Benchmark,
    pub source_dir: String,
    pub emitted: u64,
    pub skipped: Vec<SkippedEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_seed: Option<u64>,
}

#[derive(Debug)]
pub struct IngestOutcome {
    pub items: Vec<BenchmarkItem>,
    pub manifest: IngestManifest,
}

impl IngestOutcome {
    pub(crate) fn new(benchmark: Benchmark, source_dir: &Path) -> Self {
        IngestOutcome {
            items: Vec::new(),
            manifest: IngestManifest {
                benchmark,
                source_dir: source_dir.display().to_string(),
                emitted: 0,
                skipped: Vec::new(),
                sample_seed: None,
            },
        }
    }

    pub(crate) fn emit(&mut self, item: BenchmarkItem) {
        self.items.push(item);
        self.manifest.emitted += 1;
    }

    pub(crate) fn skip(&mut self, source_id: impl Into<String>, reason: impl Into<String>) {
        self.manifest.skipped.push(SkippedEntry {
            source_id: source_id.into(),
            reason: reason.into(),
        });
    }
}

/// Resolve an image path relative to `root`, or record a skip.
pub(crate) fn image_exists(root: &Path, rel: &str) -> bool {
    root.join(rel).is_file()
}

const HALLUSION_CATEGORIES: [&str; 8] = [
    "chart", "figure", "illusion", "map", "math", "ocr", "table", "video",
];

const MATHVISTA_CATEGORIES: [&str; 7] = ["LR", "AR", "GR", "SR", "ALR", "SCR", "NC"];

const SEED_CATEGORIES: [&str; 9] = [
    "SU", "II", "IA", "ILoc", "ICount", "SR", "IntI", "TU", "VR",
];

fn synthetic_image(out_dir: &Path, name: &str, seed: u64) -> std::io::Result<String> {
    let rel = format!("images/{name}.png");
    let path = out_dir.join(&rel);
    std::fs::create_dir_all(path.parent().unwrap())?;
    // valid-enough PNG magic plus unique trailing bytes
    let mut bytes = b"\x89PNG\r\n\x1a\n".to_vec();
    bytes.extend_from_slice(name.as_bytes());
    bytes.extend_from_slice(&seed.to_le_bytes());
    std::fs::write(&path, bytes)?;
    Ok(rel)
}

fn blank_item(benchmark: Benchmark, id: String, question: String) -> BenchmarkItem {
    BenchmarkItem {
        id,
        benchmark,
        image_ref: None,
        question,
        qtype: QType::Yorn,
        options: None,
        gold: "yes".into(),
        category: None,
        subtask: None,
        pair_id: None,
        figure_id: None,
        difficulty: None,
    }
}

/// Build `n` items shaped like the given benchmark, writing placeholder
/// images under `out_dir/images/`. Deterministic in `seed`.
pub fn make_synthetic(
    benchmark: Benchmark,
    n: usize,
    seed: u64,
    out_dir: &Path,
) -> std::io::Result<Vec<BenchmarkItem>> {
    use crate::metrics::{MME_COGNITION_SUBTASKS, MME_PERCEPTION_SUBTASKS};
    let mut items = Vec::with_capacity(n);
    match benchmark {
        Benchmark::Mmvp => {
            for i in 0..n {
                let id = format!("mmvp_{i:04}");
                let image = synthetic_image(out_dir, &id, seed)?;
                let mut item = blank_item(
                    benchmark,
                    id,
                    format!("Synthetic pair probe {i}: is marker {} present?", i % 7),
                );
                item.image_ref = Some(image);
                item.qtype = QType::Mcq;
                item.options = Some(vec!["present".into(), "absent".into()]);
                item.gold = if i % 2 == 0 { "A".into() } else { "B".into() };
                item.pair_id = Some(format!("pair_{:04}", i / 2));
                items.push(item);
            }
        }
        Benchmark::Hallusionbench => {
            for i in 0..n {
                let figure = i / 4;
                let pair = i / 2;
                let id = format!("hb_{i:04}");
                let image = synthetic_image(out_dir, &format!("hb_fig{figure}_{}", i % 2), seed)?;
                let mut item = blank_item(
                    benchmark,
                    id,
                    format!("Synthetic claim {pair}: does the rendering support it?"),
                );
                item.image_ref = Some(image);
                item.gold = if i % 2 == 0 { "yes".into() } else { "no".into() };
                item.category =
                    Some(HALLUSION_CATEGORIES[figure % HALLUSION_CATEGORIES.len()].into());
                item.pair_id = Some(format!("hbp_{pair:04}"));
                item.figure_id = Some(format!("hbf_{figure:04}"));
                item.difficulty = Some(if i % 2 == 0 {
                    Difficulty::Easy
                } else {
                    Difficulty::Hard
                });
                items.push(item);
            }
        }
        Benchmark::PopeAdv => {
            for i in 0..n {
                let id = format!("pope_{i:04}");
                let image = synthetic_image(out_dir, &id, seed)?;
                let mut item = blank_item(
                    benchmark,
                    id,
                    format!("Is there a synthetic object {} in the image?", i % 11),
                );
                item.image_ref = Some(image);
                item.gold = if i % 2 == 0 { "yes".into() } else { "no".into() };
                items.push(item);
            }
        }
        Benchmark::Mme => {
            let subtasks: Vec<&str> = MME_PERCEPTION_SUBTASKS
                .iter()
                .chain(&MME_COGNITION_SUBTASKS)
                .copied()
                .collect();
            for i in 0..n {
                let image_idx = i / 2;
                let subtask = subtasks[image_idx % subtasks.len()];
                let id = format!("mme_{subtask}_{image_idx:03}_{}", i % 2);
                let image = synthetic_image(out_dir, &format!("mme_{subtask}_{image_idx:03}"), seed)?;
                let mut item = blank_item(
                    benchmark,
                    id,
                    format!(
                        "Synthetic {subtask} check {image_idx}: is variant {} shown?",
                        i % 2
                    ),
                );
                item.image_ref = Some(image);
                item.gold = if i % 2 == 0 { "yes".into() } else { "no".into() };
                item.subtask = Some(subtask.into());
                items.push(item);
            }
        }
        Benchmark::Mathvista => {
            for i in 0..n {
                let id = format!("mathvista_{i:04}");
                let image = synthetic_image(out_dir, &id, seed)?;
                let category = MATHVISTA_CATEGORIES[i % MATHVISTA_CATEGORIES.len()];
                let mut item = blank_item(benchmark, id, String::new());
                item.image_ref = Some(image);
                item.category = Some(category.into());
                if i % 2 == 0 {
                    item.question = format!("Synthetic count {i}: how many markers are drawn?");
                    item.qtype = QType::Free;
                    item.gold = format!("{}", (i % 9) + 1);
                } else {
                    item.question = format!("Synthetic compare {i}: which region is larger?");
                    item.qtype = QType::Mcq;
                    item.options =
                        Some(vec!["left".into(), "right".into(), "equal".into()]);
                    item.gold = BenchmarkItem::option_label(i % 3);
                }
                items.push(item);
            }
        }
        Benchmark::Seedbench | Benchmark::Custom => {
            for i in 0..n {
                let id = format!("seed_{i:04}");
                let image = synthetic_image(out_dir, &id, seed)?;
                let mut item = blank_item(
                    benchmark,
                    id,
                    format!("Synthetic scene {i}: what does the layout depict?"),
                );
                item.image_ref = Some(image);
                item.qtype = QType::Mcq;
                item.options = Some(vec![
                    "a market".into(),
                    "a harbor".into(),
                    "a forest".into(),
                    "a runway".into(),
                ]);
                item.gold = BenchmarkItem::option_label(i % 4);
                item.category = Some(SEED_CATEGORIES[i % SEED_CATEGORIES.len()].into());
                items.push(item);
            }
        }
    }
    Ok(items)
}

fn wrong_answer(item: &BenchmarkItem) -> String {
    match item.qtype {
        QType::Yorn => {
            if item.gold.eq_ignore_ascii_case("yes") {
                "no".into()
            } else {
                "yes".into()
            }
        }
        QType::Mcq => {
            let count = item.options.as_ref().map_or(2, |o| o.len());
            let idx = (item.gold.trim().to_ascii_uppercase().as_bytes()[0] - b'A') as usize;
            BenchmarkItem::option_label((idx + 1) % count)
        }
        QType::Free => match item.gold.trim().parse::<f64>() {
            Ok(v) => format!("{}", v + 1.0),
            Err(_) => format!("not {}", item.gold),
        },
    }
}

fn answer_text(item: &BenchmarkItem, answer: &str) -> String {
    match item.qtype {
        QType::Yorn => format!("Based on the findings, the answer is {answer}."),
        QType::Mcq => format!("The best match is ({}).", answer.to_ascii_lowercase()),
        QType::Free => format!("The value works out to {answer}."),
    }
}

/// Script every stage of every item so any method replays offline. With
/// `wrong_every = Some(k)`, every k-th item answers incorrectly, giving
/// synthetic runs a known accuracy.
pub fn synth_mock_script(items: &[BenchmarkItem], wrong_every: Option<usize>) -> MockScript {
    let mut script =
        MockScript::with_default("Observation noted while following the given step.");
    for (i, item) in items.iter().enumerate() {
        let wrong = wrong_every.map_or(false, |k| k > 0 && (i + 1) % k == 0);
        let answer = if wrong {
            wrong_answer(item)
        } else {
            item.gold.clone()
        };
        let hint = match item.qtype {
            QType::Yorn => "answer yes or no",
            QType::Mcq => "answer with the option letter",
            QType::Free => "answer with only the value",
        };
        script.insert(
            &item.id,
            StageName::Generate,
            format!(
                "1. Identify the subject referenced by the question.\n\
                 2. Inspect the region where the subject would appear.\n\
                 3. Format: {hint}"
            ),
        );
        script.insert(
            &item.id,
            StageName::Extract,
            format!("1. The subject is visible. 2. Its state matches description {i}."),
        );
        script.insert(&item.id, StageName::Answer, answer_text(item, &answer));
        script.insert(
            &item.id,
            StageName::Baseline,
            format!("Looking at the image step by step. {}", answer_text(item, &answer)),
        );
    }
    script
}
