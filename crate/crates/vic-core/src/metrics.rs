//! Scoring: from run records to benchmark metrics.
//!
//! Every metric is computed with integer counting and a single final
//! division, so results are exact up to one f64 rounding. Items without a
//! record count as incorrect; an unparseable answer counts as incorrect
//! everywhere but is excluded from the binary confusion counts.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Benchmark, BenchmarkItem, Difficulty, QType, RunRecord, UNPARSEABLE};

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("duplicate record for item {item_id:?}")]
    DuplicateRecord { item_id: String },
    #[error("record {item_id:?} does not match any item")]
    OrphanRecord { item_id: String },
    #[error("item {item_id:?} is not a yes/no question")]
    NonBinaryItem { item_id: String },
    #[error("pair {pair_id:?} has {count} item(s), expected 2")]
    BrokenPair { pair_id: String, count: usize },
    #[error("item {item_id:?} is missing {field}")]
    MissingGroupField {
        item_id: String,
        field: &'static str,
    },
    #[error("baseline value {value} is not positive")]
    NonPositiveBaseline { value: f64 },
}

/// One item joined with its record, if any.
#[derive(Debug)]
pub struct Joined<'a> {
    pub item: &'a BenchmarkItem,
    pub parsed: Option<&'a str>,
    pub correct: bool,
}

/// Join records onto items by id. Duplicate records and records without a
/// matching item are hard errors; items without a record join as incorrect.
pub fn join_records<'a>(
    items: &'a [BenchmarkItem],
    records: &'a [RunRecord],
) -> Result<Vec<Joined<'a>>, MetricError> {
    let mut by_id: HashMap<&str, &RunRecord> = HashMap::new();
    for record in records {
        if by_id.insert(&record.item_id, record).is_some() {
            return Err(MetricError::DuplicateRecord {
                item_id: record.item_id.clone(),
            });
        }
    }
    let known: HashSet<&str> = items.iter().map(|i| i.id.as_str()).collect();
    for record in records {
        if !known.contains(record.item_id.as_str()) {
            return Err(MetricError::OrphanRecord {
                item_id: record.item_id.clone(),
            });
        }
    }
    Ok(items
        .iter()
        .map(|item| {
            let record = by_id.get(item.id.as_str());
            Joined {
                item,
                parsed: record.map(|r| r.parsed_answer.as_str()),
                correct: record.map_or(false, |r| r.correct),
            }
        })
        .collect())
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Plain accuracy: correct over all items.
pub fn score_accuracy(joined: &[Joined<'_>]) -> f64 {
    let correct = joined.iter().filter(|j| j.correct).count() as u64;
    ratio(correct, joined.len() as u64)
}

/// Accuracy per category; items without one fall under "uncategorized".
pub fn score_by_category(joined: &[Joined<'_>]) -> BTreeMap<String, f64> {
    let mut counts: BTreeMap<String, (u64, u64)> = BTreeMap::new();
    for j in joined {
        let key = j
            .item
            .category
            .clone()
            .unwrap_or_else(|| "uncategorized".to_string());
        let slot = counts.entry(key).or_insert((0, 0));
        slot.1 += 1;
        if j.correct {
            slot.0 += 1;
        }
    }
    counts
        .into_iter()
        .map(|(k, (c, n))| (k, ratio(c, n)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryScores {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub yes_rate: f64,
}

/// Confusion metrics for yes/no items, with "yes" as the positive class.
/// Unparseable or missing answers count against accuracy and appear in the
/// yes-rate denominator, but contribute to none of the confusion cells.
pub fn score_binary(joined: &[Joined<'_>]) -> Result<BinaryScores, MetricError> {
    let (mut tp, mut fp, mut tn, mut fn_) = (0u64, 0u64, 0u64, 0u64);
    let n = joined.len() as u64;
    for j in joined {
        if j.item.qtype != QType::Yorn {
            return Err(MetricError::NonBinaryItem {
                item_id: j.item.id.clone(),
            });
        }
        let gold_yes = j.item.gold.trim().eq_ignore_ascii_case("yes");
        let parsed = j.parsed.unwrap_or(UNPARSEABLE).trim();
        let predicted_yes = if parsed.eq_ignore_ascii_case("yes") {
            Some(true)
        } else if parsed.eq_ignore_ascii_case("no") {
            Some(false)
        } else {
            None
        };
        match (gold_yes, predicted_yes) {
            (true, Some(true)) => tp += 1,
            (true, Some(false)) => fn_ += 1,
            (false, Some(true)) => fp += 1,
            (false, Some(false)) => tn += 1,
            (_, None) => {}
        }
    }
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if tp == 0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    Ok(BinaryScores {
        accuracy: ratio(tp + tn, n),
        precision,
        recall,
        f1,
        yes_rate: ratio(tp + fp, n),
    })
}

/// Fraction of pairs with both members correct. Every pair must have
/// exactly two items.
pub fn score_pair_accuracy(joined: &[Joined<'_>]) -> Result<f64, MetricError> {
    let mut pairs: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for j in joined {
        let pair_id = j.item.pair_id.as_deref().ok_or(MetricError::MissingGroupField {
            item_id: j.item.id.clone(),
            field: "pair_id",
        })?;
        let slot = pairs.entry(pair_id).or_insert((0, 0));
        slot.1 += 1;
        if j.correct {
            slot.0 += 1;
        }
    }
    for (pair_id, (_, count)) in &pairs {
        if *count != 2 {
            return Err(MetricError::BrokenPair {
                pair_id: pair_id.to_string(),
                count: *count as usize,
            });
        }
    }
    let both = pairs.values().filter(|(c, _)| *c == 2).count() as u64;
    Ok(ratio(both, pairs.len() as u64))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HallusionScores {
    /// Question-level accuracy over everything.
    pub aa: f64,
    /// Accuracy over unedited (easy) images.
    pub ea: f64,
    /// Accuracy over human-edited (hard) images.
    pub ha: f64,
    /// Fraction of figures whose every question is correct.
    pub fa: f64,
    /// Fraction of question groups whose every variant is correct.
    pub qpa: f64,
}

fn group_all_correct(groups: &BTreeMap<&str, (u64, u64)>) -> f64 {
    let all = groups.values().filter(|(c, n)| c == n && *n > 0).count() as u64;
    ratio(all, groups.len() as u64)
}

/// Accuracy decomposition over paired original/edited imagery.
pub fn score_hallusion(joined: &[Joined<'_>]) -> Result<HallusionScores, MetricError> {
    let (mut correct, mut total) = (0u64, 0u64);
    let (mut easy_correct, mut easy_total) = (0u64, 0u64);
    let (mut hard_correct, mut hard_total) = (0u64, 0u64);
    let mut figures: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    let mut pairs: BTreeMap<&str, (u64, u64)> = BTreeMap::new();
    for j in joined {
        let figure_id = j.item.figure_id.as_deref().ok_or(MetricError::MissingGroupField {
            item_id: j.item.id.clone(),
            field: "figure_id",
        })?;
        let pair_id = j.item.pair_id.as_deref().ok_or(MetricError::MissingGroupField {
            item_id: j.item.id.clone(),
            field: "pair_id",
        })?;
        total += 1;
        let hit = u64::from(j.correct);
        correct += hit;
        match j.item.difficulty {
            Some(Difficulty::Easy) | None => {
                easy_total += 1;
                easy_correct += hit;
            }
            Some(Difficulty::Hard) => {
                hard_total += 1;
                hard_correct += hit;
            }
        }
        let f = figures.entry(figure_id).or_insert((0, 0));
        f.1 += 1;
        f.0 += hit;
        let p = pairs.entry(pair_id).or_insert((0, 0));
        p.1 += 1;
        p.0 += hit;
    }
    Ok(HallusionScores {
        aa: ratio(correct, total),
        ea: ratio(easy_correct, easy_total),
        ha: ratio(hard_correct, hard_total),
        fa: group_all_correct(&figures),
        qpa: group_all_correct(&pairs),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmeSubtask {
    /// Questions in the subtask.
    pub n: u64,
    /// Images with exactly two questions; the accuracy-plus denominator.
    pub images: u64,
    /// Images with a question count other than two, excluded from
    /// accuracy-plus.
    pub orphan_images: u64,
    pub accuracy: f64,
    pub accuracy_plus: f64,
    /// `100 * accuracy + 100 * accuracy_plus`, in [0, 200].
    pub score: f64,
}

pub const MME_PERCEPTION_SUBTASKS: [&str; 10] = [
    "existence",
    "count",
    "position",
    "color",
    "posters",
    "celebrity",
    "scene",
    "landmark",
    "artwork",
    "ocr",
];

pub const MME_COGNITION_SUBTASKS: [&str; 4] = [
    "commonsense_reasoning",
    "numerical_calculation",
    "text_translation",
    "code_reasoning",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmeScores {
    pub perception_total: f64,
    pub cognition_total: f64,
    pub per_subtask: BTreeMap<String, MmeSubtask>,
}

/// Per-subtask scoring where each image carries two questions. Accuracy
/// counts every question; accuracy-plus counts images with both questions
/// correct, over images that actually have two questions. Subtasks outside
/// the standard perception/cognition sets are scored but excluded from the
/// totals.
pub fn score_mme(joined: &[Joined<'_>]) -> Result<MmeScores, MetricError> {
    struct SubtaskAgg<'a> {
        correct: u64,
        total: u64,
        images: BTreeMap<&'a str, (u64, u64)>,
    }
    let mut subtasks: BTreeMap<&str, SubtaskAgg<'_>> = BTreeMap::new();
    for j in joined {
        let subtask = j.item.subtask.as_deref().ok_or(MetricError::MissingGroupField {
            item_id: j.item.id.clone(),
            field: "subtask",
        })?;
        let image = j.item.image_ref.as_deref().ok_or(MetricError::MissingGroupField {
            item_id: j.item.id.clone(),
            field: "image_ref",
        })?;
        let agg = subtasks.entry(subtask).or_insert_with(|| SubtaskAgg {
            correct: 0,
            total: 0,
            images: BTreeMap::new(),
        });
        agg.total += 1;
        let hit = u64::from(j.correct);
        agg.correct += hit;
        let img = agg.images.entry(image).or_insert((0, 0));
        img.1 += 1;
        img.0 += hit;
    }
    let mut per_subtask = BTreeMap::new();
    for (name, agg) in subtasks {
        let paired = agg.images.values().filter(|(_, n)| *n == 2);
        let images = paired.clone().count() as u64;
        let both = paired.filter(|(c, _)| *c == 2).count() as u64;
        let orphan_images = agg.images.values().filter(|(_, n)| *n != 2).count() as u64;
        let accuracy = ratio(agg.correct, agg.total);
        let accuracy_plus = ratio(both, images);
        per_subtask.insert(
            name.to_string(),
            MmeSubtask {
                n: agg.total,
                images,
                orphan_images,
                accuracy,
                accuracy_plus,
                score: 100.0 * accuracy + 100.0 * accuracy_plus,
            },
        );
    }
    let total_of = |names: &[&str]| {
        names
            .iter()
            .filter_map(|n| per_subtask.get(*n))
            .map(|s| s.score)
            .sum()
    };
    Ok(MmeScores {
        perception_total: total_of(&MME_PERCEPTION_SUBTASKS),
        cognition_total: total_of(&MME_COGNITION_SUBTASKS),
        per_subtask,
    })
}

/// Relative change from `old` to `new` in percent.
pub fn percent_change(old: f64, new: f64) -> Result<f64, MetricError> {
    if old <= 0.0 {
        return Err(MetricError::NonPositiveBaseline { value: old });
    }
    Ok(100.0 * (new - old) / old)
}

/// Render with direction arrow and two decimals, e.g. `↑16.59%`.
pub fn render_percent_change(pc: f64) -> String {
    let arrow = if pc < 0.0 { "↓" } else { "↑" };
    format!("{arrow}{:.2}%", pc.abs())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub benchmark: Benchmark,
    /// Item count the run was scored against.
    pub n: u64,
    /// Headline metrics keyed by name.
    pub overall: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub by_category: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub by_subtask: Option<BTreeMap<String, MmeSubtask>>,
    pub unparseable_count: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub run_id: Option<String>,
}

/// Score a full run against its item set.
pub fn build_report(
    benchmark: Benchmark,
    items: &[BenchmarkItem],
    records: &[RunRecord],
    run_id: Option<&str>,
) -> Result<MetricReport, MetricError> {
    let joined = join_records(items, records)?;
    let unparseable_count = joined
        .iter()
        .filter(|j| j.parsed.map_or(false, |p| p == UNPARSEABLE))
        .count() as u64;
    let mut overall = BTreeMap::new();
    let mut by_category = BTreeMap::new();
    let mut by_subtask = None;
    match benchmark {
        Benchmark::Mmvp => {
            overall.insert("accuracy".into(), score_accuracy(&joined));
            overall.insert("pair_accuracy".into(), score_pair_accuracy(&joined)?);
        }
        Benchmark::Hallusionbench => {
            let h = score_hallusion(&joined)?;
            overall.insert("aa".into(), h.aa);
            overall.insert("ea".into(), h.ea);
            overall.insert("ha".into(), h.ha);
            overall.insert("fa".into(), h.fa);
            overall.insert("qpa".into(), h.qpa);
            let b = score_binary(&joined)?;
            overall.insert("precision".into(), b.precision);
            overall.insert("recall".into(), b.recall);
            overall.insert("f1".into(), b.f1);
            overall.insert("yes_rate".into(), b.yes_rate);
            by_category = score_by_category(&joined);
        }
        Benchmark::PopeAdv => {
            let b = score_binary(&joined)?;
            overall.insert("accuracy".into(), b.accuracy);
            overall.insert("precision".into(), b.precision);
            overall.insert("recall".into(), b.recall);
            overall.insert("f1".into(), b.f1);
            overall.insert("yes_rate".into(), b.yes_rate);
        }
        Benchmark::Mme => {
            let m = score_mme(&joined)?;
            overall.insert("perception_total".into(), m.perception_total);
            overall.insert("cognition_total".into(), m.cognition_total);
            by_subtask = Some(m.per_subtask);
        }
        Benchmark::Mathvista | Benchmark::Seedbench | Benchmark::Custom => {
            overall.insert("accuracy".into(), score_accuracy(&joined));
            by_category = score_by_category(&joined);
            if by_category.len() == 1 && by_category.contains_key("uncategorized") {
                by_category.clear();
            }
        }
    }
    Ok(MetricReport {
        benchmark,
        n: joined.len() as u64,
        overall,
        by_category,
        by_subtask,
        unparseable_count,
        run_id: run_id.map(|s| s.to_string()),
    })
}
