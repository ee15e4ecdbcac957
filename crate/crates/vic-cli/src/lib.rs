//! `vic` — ingest benchmarks, run inference methods over them, score the
//! records, and tabulate cross-run comparisons.
//!
//! Exit codes are a stable contract: 0 success, 1 runtime failure,
//! 2 usage/config error.

pub mod config;
pub mod report;
pub mod runner;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use vic_core::benchmarks::{
    ingest_hallusion, ingest_mathvista, ingest_mme, ingest_mmvp, ingest_pope, ingest_seed,
    make_synthetic, synth_mock_script, IngestManifest, IngestOutcome,
};
use vic_core::metrics::{build_report, MetricReport};
use vic_core::model::{read_items, read_run_records, write_items, Benchmark};

use config::RunConfig;

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or a bad manifest: nothing was executed. Exit 2.
    Config(String),
    /// The work itself failed. Exit 1.
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<vic_core::model::JsonlError> for CliError {
    fn from(e: vic_core::model::JsonlError) -> Self {
        CliError::Runtime(e.into())
    }
}

impl From<vic_core::benchmarks::IngestError> for CliError {
    fn from(e: vic_core::benchmarks::IngestError) -> Self {
        CliError::Runtime(e.into())
    }
}

type CliResult = Result<(), CliError>;

#[derive(Parser)]
#[command(name = "vic", version, about = "Thinking-before-looking evaluation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize a benchmark distribution into items JSONL (+ manifest)
    Ingest {
        /// mmvp | hallusionbench | pope_adv | mme | mathvista | seedbench
        benchmark: String,
        /// Benchmark distribution directory
        #[arg(long)]
        src: PathBuf,
        /// Output items file (manifest written beside it)
        #[arg(long)]
        out: PathBuf,
        /// Sampling seed (seedbench only; default 0)
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Execute a configured run; reruns resume where they stopped
    Run {
        /// TOML run manifest
        #[arg(long)]
        config: PathBuf,
        /// Override the manifest's head-N item limit
        #[arg(long)]
        limit: Option<usize>,
    },
    /// Score run records against their item set
    Score {
        #[arg(long)]
        records: PathBuf,
        #[arg(long)]
        items: PathBuf,
        #[arg(long)]
        benchmark: String,
        /// Report path (default: metrics.<benchmark>.json beside records)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate metric reports, with deltas against a baseline run
    Report {
        /// Metric report JSON files
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// run_id to compute percent changes against
        #[arg(long)]
        baseline: Option<String>,
        /// Where report.md / report.csv land (default: beside first file)
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Generate a synthetic benchmark (items, images, optional mock script)
    Synth {
        #[arg(long)]
        benchmark: String,
        /// Number of items
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: PathBuf,
        /// Also write mock_script.json covering every stage of every item
        #[arg(long)]
        mock_script: bool,
        /// Make every k-th item answer incorrectly in the mock script
        #[arg(long)]
        wrong_every: Option<usize>,
    },
}

pub fn run() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help / --version print to stdout and exit 0; real usage
            // errors go to stderr and exit 2
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(CliError::Config(msg)) => {
            eprintln!("config error: {msg}");
            2
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> CliResult {
    match cli.command {
        Command::Ingest {
            benchmark,
            src,
            out,
            seed,
        } => cmd_ingest(&benchmark, &src, &out, seed),
        Command::Run { config, limit } => cmd_run(&config, limit),
        Command::Score {
            records,
            items,
            benchmark,
            out,
        } => cmd_score(&records, &items, &benchmark, out),
        Command::Report {
            files,
            baseline,
            out_dir,
        } => cmd_report(&files, baseline.as_deref(), out_dir),
        Command::Synth {
            benchmark,
            n,
            seed,
            out_dir,
            mock_script,
            wrong_every,
        } => cmd_synth(&benchmark, n, seed, &out_dir, mock_script, wrong_every),
    }
}

fn parse_benchmark(name: &str) -> Result<Benchmark, CliError> {
    Benchmark::parse(name).ok_or_else(|| {
        CliError::Config(format!(
            "unknown benchmark {name:?} (expected mmvp, hallusionbench, pope_adv, mme, \
             mathvista, seedbench, or custom)"
        ))
    })
}

/// `items.jsonl` -> `items.manifest.json`
fn manifest_path(out: &Path) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "items".to_string());
    out.with_file_name(format!("{stem}.manifest.json"))
}

fn write_manifest(path: &Path, manifest: &IngestManifest) -> CliResult {
    let mut body = serde_json::to_vec_pretty(manifest).map_err(anyhow::Error::from)?;
    body.push(b'\n');
    std::fs::write(path, body).map_err(anyhow::Error::from)?;
    Ok(())
}

fn cmd_ingest(benchmark: &str, src: &Path, out: &Path, seed: Option<u64>) -> CliResult {
    let bench = parse_benchmark(benchmark)?;
    let outcome: IngestOutcome = match bench {
        Benchmark::Mmvp => ingest_mmvp(src),
        Benchmark::Hallusionbench => ingest_hallusion(src),
        Benchmark::PopeAdv => ingest_pope(src),
        Benchmark::Mme => ingest_mme(src),
        Benchmark::Mathvista => ingest_mathvista(src),
        Benchmark::Seedbench => ingest_seed(src, seed.unwrap_or(0)),
        Benchmark::Custom => {
            return Err(CliError::Config(
                "custom items are authored directly as JSONL; there is no adapter".into(),
            ))
        }
    }?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(anyhow::Error::from)?;
    }
    write_items(out, &outcome.items)?;
    write_manifest(&manifest_path(out), &outcome.manifest)?;
    println!(
        "benchmark={} emitted={} skipped={} -> {}",
        bench,
        outcome.manifest.emitted,
        outcome.manifest.skipped.len(),
        out.display()
    );
    Ok(())
}

fn cmd_run(config_path: &Path, limit: Option<usize>) -> CliResult {
    let mut config = RunConfig::load(config_path).map_err(CliError::Config)?;
    if let Some(limit) = limit {
        if limit == 0 {
            return Err(CliError::Config("--limit must be >= 1".into()));
        }
        config.limit = Some(limit);
    }
    let summary = runner::execute_run(&config)?;
    println!(
        "{{\"done\":{},\"failed\":{},\"cache_hits\":{}}}",
        summary.done, summary.failed, summary.cache_hits
    );
    Ok(())
}

/// run_id for a records file is the name of the run directory that holds it.
fn infer_run_id(records_path: &Path) -> Option<String> {
    let absolute = records_path
        .canonicalize()
        .unwrap_or_else(|_| records_path.to_path_buf());
    absolute
        .parent()
        .and_then(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned())
}

fn cmd_score(
    records_path: &Path,
    items_path: &Path,
    benchmark: &str,
    out: Option<PathBuf>,
) -> CliResult {
    let bench = parse_benchmark(benchmark)?;
    let items = read_items(items_path)?;
    if let Some(item) = items.iter().find(|i| i.benchmark != bench) {
        return Err(CliError::Runtime(anyhow::anyhow!(
            "benchmark mismatch: item {:?} is {} but --benchmark says {}",
            item.id,
            item.benchmark,
            bench
        )));
    }
    let records = read_run_records(records_path)?;
    let run_id = infer_run_id(records_path);
    let report = if records.is_empty() {
        eprintln!(
            "warning: {} holds no records; emitting an empty report",
            records_path.display()
        );
        build_report(bench, &[], &[], run_id.as_deref())
    } else {
        build_report(bench, &items, &records, run_id.as_deref())
    }
    .map_err(anyhow::Error::from)?;

    let out_path = out.unwrap_or_else(|| {
        records_path
            .parent()
            .unwrap_or(Path::new("."))
            .join(format!("metrics.{bench}.json"))
    });
    let mut body = serde_json::to_vec_pretty(&report).map_err(anyhow::Error::from)?;
    body.push(b'\n');
    std::fs::write(&out_path, body).map_err(anyhow::Error::from)?;

    let overall: Vec<String> = report
        .overall
        .iter()
        .map(|(k, v)| format!("{k}={v:.4}"))
        .collect();
    println!(
        "benchmark={} n={} unparseable={} {}",
        bench,
        report.n,
        report.unparseable_count,
        overall.join(" ")
    );
    Ok(())
}

fn cmd_report(files: &[PathBuf], baseline: Option<&str>, out_dir: Option<PathBuf>) -> CliResult {
    let mut reports: Vec<(String, MetricReport)> = Vec::new();
    for path in files {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Runtime(anyhow::anyhow!("{}: {e}", path.display())))?;
        let report: MetricReport = serde_json::from_str(&text)
            .map_err(|e| CliError::Runtime(anyhow::anyhow!("{}: {e}", path.display())))?;
        let run_id = report
            .run_id
            .clone()
            .or_else(|| infer_run_id(path))
            .unwrap_or_else(|| path.display().to_string());
        reports.push((run_id, report));
    }
    let tables = report::build_tables(&reports, baseline);
    if let Some(warning) = &tables.warning {
        eprintln!("warning: {warning}");
    }
    let out_dir = out_dir.unwrap_or_else(|| {
        files[0]
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."))
    });
    std::fs::create_dir_all(&out_dir).map_err(anyhow::Error::from)?;
    std::fs::write(out_dir.join("report.md"), &tables.markdown).map_err(anyhow::Error::from)?;
    std::fs::write(out_dir.join("report.csv"), &tables.csv).map_err(anyhow::Error::from)?;
    print!("{}", tables.markdown);
    Ok(())
}

fn cmd_synth(
    benchmark: &str,
    n: usize,
    seed: u64,
    out_dir: &Path,
    mock_script: bool,
    wrong_every: Option<usize>,
) -> CliResult {
    let bench = parse_benchmark(benchmark)?;
    if n == 0 {
        return Err(CliError::Config("--n must be >= 1".into()));
    }
    if wrong_every == Some(0) {
        return Err(CliError::Config("--wrong-every must be >= 1".into()));
    }
    std::fs::create_dir_all(out_dir).map_err(anyhow::Error::from)?;
    let items = make_synthetic(bench, n, seed, out_dir).map_err(anyhow::Error::from)?;
    let items_path = out_dir.join(format!("{bench}.jsonl"));
    write_items(&items_path, &items)?;
    let manifest = IngestManifest {
        benchmark: bench,
        source_dir: "synthetic".into(),
        emitted: items.len() as u64,
        skipped: Vec::new(),
        sample_seed: Some(seed),
    };
    write_manifest(&manifest_path(&items_path), &manifest)?;
    let script_note = if mock_script {
        let script = synth_mock_script(&items, wrong_every);
        script
            .save(&out_dir.join("mock_script.json"))
            .map_err(anyhow::Error::from)?;
        " + mock_script.json"
    } else {
        ""
    };
    println!(
        "benchmark={} items={} seed={} -> {}{}",
        bench,
        items.len(),
        seed,
        items_path.display(),
        script_note
    );
    Ok(())
}
