//! Builds the instrumented copy and runs every test in its own process.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant, SystemTime, UNIX_EPOCH};

use rtj_core::model::TargetKind;
use rtj_core::query::TestCase;
use rtj_core::trace::{RunMetadata, TestOutcome, TestStatus};
use rtj_core::{DynamicTrace, ElementId};

use crate::instrument::{runtime_tag, INSTRUMENTATION_VERSION, TEST_NAME_VAR, TRACE_DIR_VAR};
use crate::trace_file::{self, TraceFileError, TraceRecord};

/// Overrides the per-test command; see [`DEFAULT_TEMPLATE`].
pub const RUNNER_VAR: &str = "RTJ_RUNNER";

/// Placeholders: `{exe}` test executable, `{test}` harness path,
/// `{target_args}` cargo target selection (`--lib`, `--bin x`, `--test x`,
/// expands to separate arguments), `{project}` copy root.
pub const DEFAULT_TEMPLATE: &str = "{exe} --exact {test} --test-threads=1";

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(60);

#[derive(Debug, thiserror::Error)]
pub enum RunnerError {
    #[error("build failed:\n{0}")]
    Build(String),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
    #[error("runner command template is empty")]
    EmptyTemplate,
    #[error("no test executable for target {0}")]
    MissingExecutable(TargetKind),
    #[error("trace of {test} is corrupt ({file}): {source}")]
    TraceCorruption { test: String, file: String, source: TraceFileError },
}

fn io(context: impl Into<String>) -> impl FnOnce(std::io::Error) -> RunnerError {
    let context = context.into();
    move |source| RunnerError::Io { context, source }
}

#[derive(Debug, Clone)]
pub struct RunnerConfig {
    pub timeout: Duration,
    pub jobs: usize,
    pub template: String,
    /// Extra environment for every test process. Defaults to disabling
    /// panic backtraces, which cost far more than the test itself.
    pub env: Vec<(String, String)>,
}

impl Default for RunnerConfig {
    fn default() -> Self {
        Self {
            timeout: DEFAULT_TIMEOUT,
            jobs: std::thread::available_parallelism().map_or(1, |n| n.get()),
            template: std::env::var(RUNNER_VAR).ok().filter(|t| !t.trim().is_empty()).unwrap_or_else(|| DEFAULT_TEMPLATE.into()),
            env: vec![("RUST_BACKTRACE".into(), "0".into())],
        }
    }
}

/// A built copy: where it lives and the test executable of each target.
#[derive(Debug, Clone)]
pub struct Built {
    pub root: PathBuf,
    pub executables: BTreeMap<TargetKind, PathBuf>,
}

/// Makes the copied manifest a workspace root of its own, so cargo does not
/// look for an enclosing workspace from the copy's location.
pub fn isolate_manifest(copy_root: &Path) -> Result<(), RunnerError> {
    let path = copy_root.join("Cargo.toml");
    let text = std::fs::read_to_string(&path).map_err(io(path.display().to_string()))?;
    if text.lines().any(|l| l.trim() == "[workspace]") {
        return Ok(());
    }
    std::fs::write(&path, format!("{text}\n[workspace]\n")).map_err(io(path.display().to_string()))
}

/// `cargo test --no-run` on the copy; target dir is `target_dir`.
pub fn build(copy_root: &Path, target_dir: &Path) -> Result<Built, RunnerError> {
    let output = Command::new(std::env::var_os("CARGO").unwrap_or_else(|| "cargo".into()))
        .args(["test", "--no-run", "--message-format=json-render-diagnostics", "--manifest-path"])
        .arg(copy_root.join("Cargo.toml"))
        .env("CARGO_TARGET_DIR", target_dir)
        .env_remove("RUSTFLAGS")
        .current_dir(copy_root)
        .stdin(Stdio::null())
        .output()
        .map_err(io("running cargo"))?;
    if !output.status.success() {
        return Err(RunnerError::Build(String::from_utf8_lossy(&output.stderr).into_owned()));
    }
    let mut executables = BTreeMap::new();
    for line in String::from_utf8_lossy(&output.stdout).lines() {
        if let Some((kind, exe)) = test_artifact(line) {
            executables.insert(kind, exe);
        }
    }
    Ok(Built { root: copy_root.to_path_buf(), executables })
}

fn test_artifact(line: &str) -> Option<(TargetKind, PathBuf)> {
    let v: serde_json::Value = serde_json::from_str(line).ok()?;
    if v["reason"] != "compiler-artifact" || v["profile"]["test"] != true {
        return None;
    }
    let exe = PathBuf::from(v["executable"].as_str()?);
    let name = v["target"]["name"].as_str()?.to_string();
    let kinds: Vec<&str> = v["target"]["kind"].as_array()?.iter().filter_map(|k| k.as_str()).collect();
    let kind = if kinds.contains(&"bin") {
        TargetKind::Bin(name)
    } else if kinds.contains(&"test") {
        TargetKind::Test(name)
    } else if kinds.iter().any(|k| matches!(*k, "lib" | "rlib" | "dylib" | "cdylib" | "staticlib" | "proc-macro")) {
        TargetKind::Lib
    } else {
        return None;
    };
    Some((kind, exe))
}

fn target_args(target: &TargetKind) -> Vec<String> {
    match target {
        TargetKind::Lib => vec!["--lib".into()],
        TargetKind::Bin(n) => vec!["--bin".into(), n.clone()],
        TargetKind::Test(n) => vec!["--test".into(), n.clone()],
    }
}

/// Expands the template word by word so substituted paths keep their spaces.
pub fn expand_template(template: &str, exe: &Path, test: &TestCase, project: &Path) -> Vec<String> {
    let mut out = Vec::new();
    for word in template.split_whitespace() {
        if word == "{target_args}" {
            out.extend(target_args(&test.target));
            continue;
        }
        out.push(
            word.replace("{exe}", &exe.to_string_lossy())
                .replace("{test}", &test.harness_path)
                .replace("{project}", &project.to_string_lossy()),
        );
    }
    out
}

/// Reads libtest's `test result:` line.
pub fn parse_status(stdout: &str) -> TestStatus {
    let Some(line) = stdout.lines().rev().find_map(|l| l.trim().strip_prefix("test result: ")) else {
        return TestStatus::Error;
    };
    let count = |what: &str| -> u64 {
        line.split(';')
            .find_map(|part| part.trim().strip_suffix(what).and_then(|n| n.trim().rsplit(' ').next()?.parse().ok()))
            .unwrap_or(0)
    };
    let (passed, failed, ignored) = (count(" passed"), count(" failed"), count(" ignored"));
    match (passed, failed, ignored) {
        (_, f, _) if f > 0 => TestStatus::Fail,
        (1, 0, 0) => TestStatus::Pass,
        (0, 0, 1) => TestStatus::FrameworkSkipped,
        _ => TestStatus::Error,
    }
}

struct TestRun {
    outcome: TestOutcome,
    record: Option<TraceRecord>,
    warning: Option<String>,
}

/// Runs each test once, in parallel across processes, and merges the part
/// files of each test into one trace. `traced` and `element_count` come from
/// the instrumentation step.
pub fn execute_tests(
    built: &Built,
    tests: &[TestCase],
    traced: BTreeSet<ElementId>,
    element_count: usize,
    trace_root: &Path,
    config: &RunnerConfig,
) -> Result<(DynamicTrace, Vec<String>), RunnerError> {
    if config.template.split_whitespace().next().is_none() {
        return Err(RunnerError::EmptyTemplate);
    }
    if trace_root.exists() {
        std::fs::remove_dir_all(trace_root).map_err(io(trace_root.display().to_string()))?;
    }
    for t in tests {
        if !built.executables.contains_key(&t.target) {
            return Err(RunnerError::MissingExecutable(t.target.clone()));
        }
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<TestRun, RunnerError>>>> = Mutex::new((0..tests.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..config.jobs.max(1).min(tests.len().max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(test) = tests.get(i) else { break };
                let r = run_one(built, test, &trace_root.join(i.to_string()), element_count, config);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    let mut trace = DynamicTrace::new(traced, run_metadata());
    let mut warnings = Vec::new();
    for r in results.into_inner().unwrap().into_iter().flatten() {
        let run = r?;
        if let Some(rec) = run.record {
            for (id, n) in rec.hits {
                if trace.traced.contains(&id) {
                    trace.add_hits(&run.outcome.test, id, n);
                }
            }
        }
        warnings.extend(run.warning);
        trace.record_outcome(run.outcome);
    }
    Ok((trace, warnings))
}

fn run_one(built: &Built, test: &TestCase, dir: &Path, element_count: usize, config: &RunnerConfig) -> Result<TestRun, RunnerError> {
    std::fs::create_dir_all(dir).map_err(io(dir.display().to_string()))?;
    let exe = &built.executables[&test.target];
    let argv = expand_template(&config.template, exe, test, &built.root);
    let stdout_path = dir.join("stdout.log");
    let stdout = std::fs::File::create(&stdout_path).map_err(io(stdout_path.display().to_string()))?;
    let stderr = std::fs::File::create(dir.join("stderr.log")).map_err(io(dir.display().to_string()))?;
    let mut cmd = Command::new(&argv[0]);
    cmd.args(&argv[1..])
        .current_dir(&built.root)
        .env(TRACE_DIR_VAR, dir)
        .env(TEST_NAME_VAR, &test.name)
        .env("CARGO_MANIFEST_DIR", &built.root)
        .envs(config.env.iter().map(|(k, v)| (k, v)))
        .stdin(Stdio::null())
        .stdout(stdout)
        .stderr(stderr);
    #[cfg(unix)]
    std::os::unix::process::CommandExt::process_group(&mut cmd, 0);
    let start = Instant::now();
    let mut child = cmd.spawn().map_err(io(format!("spawning {}", argv[0])))?;
    let mut timed_out = false;
    loop {
        if child.try_wait().map_err(io("waiting for test"))?.is_some() {
            break;
        }
        if start.elapsed() >= config.timeout {
            kill_group(&mut child);
            let _ = child.wait();
            timed_out = true;
            break;
        }
        std::thread::sleep(Duration::from_millis(5));
    }
    let duration_ms = start.elapsed().as_millis() as u64;
    let out_text = std::fs::read_to_string(&stdout_path).unwrap_or_default();
    let status = if timed_out { TestStatus::Error } else { parse_status(&out_text) };
    let warning = timed_out.then(|| format!("{}: timed out after {}s", test.name, config.timeout.as_secs()));
    let record = merge_parts(dir, test, element_count)?;
    Ok(TestRun { outcome: TestOutcome { test: test.name.clone(), status, duration_ms }, record, warning })
}

#[cfg(unix)]
fn kill_group(child: &mut std::process::Child) {
    // The child leads its own process group.
    unsafe {
        libc::kill(-(child.id() as i32), libc::SIGKILL);
    }
}

#[cfg(not(unix))]
fn kill_group(child: &mut std::process::Child) {
    let _ = child.kill();
}

/// Merges every `*.part` file of one test; the merged trace is written next
/// to them as `merged.trace`.
fn merge_parts(dir: &Path, test: &TestCase, element_count: usize) -> Result<Option<TraceRecord>, RunnerError> {
    let mut parts: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io(dir.display().to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "part"))
        .collect();
    if parts.is_empty() {
        return Ok(None);
    }
    parts.sort();
    let mut merged = TraceRecord { test: test.name.clone(), hits: BTreeMap::new() };
    for p in parts {
        let corrupt = |source| RunnerError::TraceCorruption { test: test.name.clone(), file: p.display().to_string(), source };
        let text = std::fs::read_to_string(&p).map_err(io(p.display().to_string()))?;
        let rec = trace_file::parse(&text, element_count).map_err(corrupt)?;
        merged.merge(rec).map_err(corrupt)?;
    }
    let path = dir.join("merged.trace");
    std::fs::write(&path, merged.render()).map_err(io(path.display().to_string()))?;
    Ok(Some(merged))
}

/// Name of the part file one target writes.
pub fn part_file_name(target: &TargetKind) -> String {
    format!("{}.part", runtime_tag(target))
}

pub fn run_metadata() -> RunMetadata {
    RunMetadata {
        timestamp: SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs()),
        framework_version: rustc_version(),
        instrumentation_version: INSTRUMENTATION_VERSION.into(),
    }
}

fn rustc_version() -> String {
    Command::new(std::env::var_os("RUSTC").unwrap_or_else(|| "rustc".into()))
        .arg("--version")
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".into())
}
