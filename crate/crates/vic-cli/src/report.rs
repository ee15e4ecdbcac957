//! Cross-run comparison tables: one row per run, one column per benchmark
//! headline metric, each non-baseline cell annotated with its percent
//! change against the baseline run. Markdown for reading, CSV mirroring
//! the same numbers for machines.

use vic_core::metrics::{percent_change, render_percent_change, MetricReport};
use vic_core::model::Benchmark;

/// The metric a benchmark's comparison column reports.
fn headline_columns(benchmark: Benchmark) -> Vec<(String, &'static str)> {
    let cols: &[&str] = match benchmark {
        Benchmark::Mmvp => &["pair_accuracy"],
        Benchmark::Hallusionbench => &["aa"],
        Benchmark::PopeAdv => &["accuracy"],
        Benchmark::Mme => &["perception_total", "cognition_total"],
        Benchmark::Mathvista | Benchmark::Seedbench | Benchmark::Custom => &["accuracy"],
    };
    cols.iter()
        .map(|metric| (format!("{}_{}", benchmark.as_str(), metric), *metric))
        .collect()
}

fn format_value(column: &str, value: f64) -> String {
    if column.ends_with("_total") {
        format!("{value:.1}")
    } else {
        format!("{value:.3}")
    }
}

#[derive(Debug)]
pub struct Row {
    pub run_id: String,
    pub cells: Vec<Option<f64>>,
}

#[derive(Debug)]
pub struct Tables {
    pub markdown: String,
    pub csv: String,
    pub warning: Option<String>,
}

/// Assemble rows (per run) and columns (per benchmark metric) from loaded
/// reports, keeping first-appearance order for both.
pub fn collect_rows(reports: &[(String, MetricReport)]) -> (Vec<String>, Vec<Row>) {
    let mut columns: Vec<String> = Vec::new();
    let mut rows: Vec<(String, Vec<(String, f64)>)> = Vec::new();
    for (run_id, report) in reports {
        for (column, metric) in headline_columns(report.benchmark) {
            let Some(value) = report.overall.get(metric) else {
                continue;
            };
            if !columns.contains(&column) {
                columns.push(column.clone());
            }
            match rows.iter_mut().find(|(id, _)| id == run_id) {
                Some((_, cells)) => cells.push((column, *value)),
                None => rows.push((run_id.clone(), vec![(column, *value)])),
            }
        }
    }
    let rows = rows
        .into_iter()
        .map(|(run_id, cells)| Row {
            run_id,
            cells: columns
                .iter()
                .map(|c| {
                    cells
                        .iter()
                        .rev() // same run scored twice: latest file wins
                        .find(|(col, _)| col == c)
                        .map(|(_, v)| *v)
                })
                .collect(),
        })
        .collect();
    (columns, rows)
}

pub fn build_tables(reports: &[(String, MetricReport)], baseline: Option<&str>) -> Tables {
    let (columns, rows) = collect_rows(reports);
    let mut warning = None;
    let baseline_row = baseline.and_then(|id| {
        let found = rows.iter().position(|r| r.run_id == id);
        if found.is_none() {
            warning = Some(format!(
                "baseline run {id:?} not among the loaded reports; emitting plain table"
            ));
        }
        found
    });
    let baseline_cells: Option<Vec<Option<f64>>> =
        baseline_row.map(|i| rows[i].cells.clone());
    let baseline_id = baseline_row.map(|i| rows[i].run_id.clone());

    // markdown
    let mut md = String::new();
    md.push_str("| run |");
    for c in &columns {
        md.push_str(&format!(" {c} |"));
    }
    md.push('\n');
    md.push_str("|---|");
    md.push_str(&"---|".repeat(columns.len()));
    md.push('\n');
    for row in &rows {
        let is_baseline = baseline_id.as_deref() == Some(row.run_id.as_str());
        md.push_str(&format!("| {}{} |", row.run_id, if is_baseline { " (baseline)" } else { "" }));
        for (i, cell) in row.cells.iter().enumerate() {
            match cell {
                None => md.push_str(" — |"),
                Some(v) => {
                    let mut text = format_value(&columns[i], *v);
                    if !is_baseline {
                        if let Some(Some(base)) =
                            baseline_cells.as_ref().map(|cells| cells[i])
                        {
                            if let Ok(pc) = percent_change(base, *v) {
                                text.push_str(&format!(" ({})", render_percent_change(pc)));
                            }
                        }
                    }
                    md.push_str(&format!(" {text} |"));
                }
            }
        }
        md.push('\n');
    }

    // csv mirrors the markdown numbers exactly (same rounding)
    let with_deltas = baseline_cells.is_some();
    let mut csv = String::from("run_id");
    for c in &columns {
        csv.push_str(&format!(",{c}"));
        if with_deltas {
            csv.push_str(&format!(",{c}_pct_change"));
        }
    }
    csv.push('\n');
    for row in &rows {
        let is_baseline = baseline_id.as_deref() == Some(row.run_id.as_str());
        csv.push_str(&row.run_id);
        for (i, cell) in row.cells.iter().enumerate() {
            match cell {
                None => {
                    csv.push(',');
                    if with_deltas {
                        csv.push(',');
                    }
                }
                Some(v) => {
                    csv.push_str(&format!(",{}", format_value(&columns[i], *v)));
                    if with_deltas {
                        let delta = if is_baseline {
                            None
                        } else {
                            baseline_cells
                                .as_ref()
                                .and_then(|cells| cells[i])
                                .and_then(|base| percent_change(base, *v).ok())
                        };
                        match delta {
                            Some(pc) => csv.push_str(&format!(",{pc:.2}")),
                            None => csv.push(','),
                        }
                    }
                }
            }
        }
        csv.push('\n');
    }

    Tables {
        markdown: md,
        csv,
        warning,
    }
}
