//! Helpers shared by the binary-level test suites.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn vic() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vic"));
    // isolate from the invoking shell
    cmd.env_remove("VIC_CACHE_DIR");
    cmd.env_remove("VIC_MOCK_CALL_LOG");
    cmd
}

pub fn run_expect(cmd: &mut Command, expected_code: i32) -> Output {
    let out = cmd.output().expect("binary spawns");
    let code = out.status.code().unwrap_or(-1);
    assert_eq!(
        code,
        expected_code,
        "exit {code}, expected {expected_code}\nstdout:\n{}\nstderr:\n{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn run_ok(cmd: &mut Command) -> Output {
    run_expect(cmd, 0)
}

/// Synthesize a benchmark with a full mock script; returns the items path.
pub fn synth(dir: &Path, benchmark: &str, n: usize, wrong_every: Option<usize>) -> PathBuf {
    let mut cmd = vic();
    cmd.arg("synth")
        .arg("--benchmark")
        .arg(benchmark)
        .arg("--n")
        .arg(n.to_string())
        .arg("--seed")
        .arg("7")
        .arg("--out-dir")
        .arg(dir)
        .arg("--mock-script");
    if let Some(k) = wrong_every {
        cmd.arg("--wrong-every").arg(k.to_string());
    }
    run_ok(&mut cmd);
    dir.join(format!("{benchmark}.jsonl"))
}

pub struct ConfigSpec<'a> {
    pub dir: &'a Path,
    pub run_id: &'a str,
    pub items: &'a Path,
    pub method: &'a str,
    pub parallelism: usize,
    /// Distinct cache per run unless tests share one deliberately.
    pub cache_dir: Option<&'a Path>,
    /// Extra top-level TOML lines.
    pub extra: &'a str,
}

pub fn write_config(spec: &ConfigSpec) -> PathBuf {
    let cache = spec
        .cache_dir
        .map(Path::to_path_buf)
        .unwrap_or_else(|| spec.dir.join(format!("cache-{}", spec.run_id)));
    let body = format!(
        r#"run_id = "{run_id}"
items_path = "{items}"
out_dir = "{out}"
parallelism = {parallelism}
cache_dir = "{cache}"
mock_script = "{script}"
{extra}
[method]
method = "{method}"
generator = "mock/scripted"
executor = "mock/scripted"

[[providers]]
id = "mock"
kind = "mock"
"#,
        run_id = spec.run_id,
        items = spec.items.display(),
        out = spec.dir.join("runs").display(),
        parallelism = spec.parallelism,
        cache = cache.display(),
        script = spec.items.parent().unwrap().join("mock_script.json").display(),
        extra = spec.extra,
        method = spec.method,
    );
    let path = spec.dir.join(format!("{}.toml", spec.run_id));
    std::fs::write(&path, body).unwrap();
    path
}

pub fn records_path(dir: &Path, run_id: &str) -> PathBuf {
    dir.join("runs").join(run_id).join("records.jsonl")
}
