//! Structural validation for benchmark items.
//!
//! Validation is shape-only: image files referenced by `image_ref` are
//! resolved when a run actually needs them, so an item set can be
//! validated on a machine that does not hold the image tree.

use thiserror::Error;

use super::{Benchmark, BenchmarkItem, QType};

#[derive(Debug, Error, PartialEq, Eq)]
#[error("item {id}: {reason}")]
pub struct InvalidItem {
    pub id: String,
    pub reason: String,
}

fn fail(item: &BenchmarkItem, reason: impl Into<String>) -> Result<(), InvalidItem> {
    Err(InvalidItem {
        id: item.id.clone(),
        reason: reason.into(),
    })
}

/// Check every structural invariant an item must satisfy before a run.
pub fn validate_item(item: &BenchmarkItem) -> Result<(), InvalidItem> {
    if item.id.trim().is_empty() {
        return Err(InvalidItem {
            id: "<empty>".into(),
            reason: "id must be non-empty".into(),
        });
    }
    if item.question.trim().is_empty() {
        return fail(item, "question must be non-empty");
    }
    if item.gold.trim().is_empty() {
        return fail(item, "gold must be non-empty");
    }
    match item.qtype {
        QType::Mcq => {
            let options = match &item.options {
                Some(o) => o,
                None => return fail(item, "mcq item must carry options"),
            };
            if options.len() < 2 {
                return fail(
                    item,
                    format!("mcq item needs at least 2 options, got {}", options.len()),
                );
            }
            let gold = item.gold.trim().to_ascii_uppercase();
            let labels: Vec<String> = (0..options.len()).map(BenchmarkItem::option_label).collect();
            if !labels.iter().any(|l| *l == gold) {
                return fail(
                    item,
                    format!(
                        "mcq gold {:?} is not one of the option labels {}",
                        item.gold,
                        labels.join("/")
                    ),
                );
            }
        }
        QType::Yorn => {
            let gold = item.gold.trim().to_ascii_lowercase();
            if gold != "yes" && gold != "no" {
                return fail(
                    item,
                    format!("yorn gold must be yes or no, got {:?}", item.gold),
                );
            }
            if item.options.is_some() {
                return fail(item, "yorn item must not carry options");
            }
        }
        QType::Free => {
            if item.options.is_some() {
                return fail(item, "free item must not carry options");
            }
        }
    }
    match item.benchmark {
        Benchmark::Mme => {
            if item.subtask.as_deref().map_or(true, |s| s.trim().is_empty()) {
                return fail(item, "mme item must carry a subtask");
            }
        }
        Benchmark::Mmvp => {
            if item.pair_id.as_deref().map_or(true, |s| s.trim().is_empty()) {
                return fail(item, "mmvp item must carry a pair_id");
            }
        }
        _ => {}
    }
    Ok(())
}
