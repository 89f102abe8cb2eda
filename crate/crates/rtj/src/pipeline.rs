//! End-to-end orchestration: model, instrumentation, execution, analysis,
//! report.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rtj_core::analysis::{run_pipeline, AnalyzerRegistry, Inputs, PipelineOutput, UnknownAnalyzer};
use rtj_core::pattern::NamePattern;
use rtj_core::query::{detect_helpers, find_test_cases, HelperMap, TestCase};
use rtj_core::refactor::RefactorPolicy;
use rtj_core::report::{build_report, ProjectInfo, Report};
use rtj_core::{DynamicTrace, ElementId, ProgramModel, Rules};

use crate::config::{load_rules, ConfigError};
use crate::frontend::{build_model, FrontendError, Project};
use crate::instrument::{instrument_sources, write_copy, Instrumented};
use crate::runner::{build, execute_tests, isolate_manifest, run_metadata, RunnerConfig, RunnerError};

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Frontend(#[from] FrontendError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Analyzer(#[from] UnknownAnalyzer),
    #[error(transparent)]
    Runner(#[from] RunnerError),
    #[error("{context}: {source}")]
    Io { context: String, source: std::io::Error },
}

#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    pub project: PathBuf,
    /// Analyzer names; `None` runs every built-in analyzer.
    pub analyzers: Option<Vec<String>>,
    /// Only tests whose qualified name matches (`*` wildcards).
    pub tests: Option<String>,
    pub policy: RefactorPolicy,
    pub runner: RunnerConfig,
    /// Holds the instrumented copy, its build and the traces; defaults to
    /// `<project>/target/rtj`.
    pub work_dir: Option<PathBuf>,
    pub keep_instrumented: bool,
}

impl AnalyzeOptions {
    pub fn new(project: impl Into<PathBuf>) -> Self {
        Self {
            project: project.into(),
            analyzers: None,
            tests: None,
            policy: RefactorPolicy::NONE,
            runner: RunnerConfig::default(),
            work_dir: None,
            keep_instrumented: false,
        }
    }
}

pub struct Analysis {
    pub project: Project,
    pub rules: Rules,
    pub tests: Vec<TestCase>,
    pub helpers: HelperMap,
    pub instrumented: Instrumented,
    pub trace: DynamicTrace,
    pub output: PipelineOutput,
    pub report: Report,
    pub warnings: Vec<String>,
    /// The instrumented copy, when kept.
    pub copy: Option<PathBuf>,
}

/// Elements probed for a run: test and helper methods and every node of
/// their bodies.
pub fn instrumentation_targets(model: &ProgramModel, tests: &[TestCase], helpers: &HelperMap) -> BTreeSet<ElementId> {
    let methods: BTreeSet<ElementId> = tests.iter().map(|t| t.method_ref).chain(helpers.keys().copied()).collect();
    let mut out = BTreeSet::new();
    for id in methods {
        if let Some(m) = model.method(id) {
            out.insert(id);
            out.extend(m.nodes.iter().copied());
        }
    }
    out
}

pub fn select_tests(model: &ProgramModel, rules: &Rules, filter: Option<&str>) -> Vec<TestCase> {
    let pattern = filter.map(NamePattern::new);
    find_test_cases(model, rules).into_iter().filter(|t| pattern.as_ref().is_none_or(|p| p.matches(&t.name))).collect()
}

fn io(context: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { context: context.display().to_string(), source }
}

/// Writes `files` over a copy of the project at `copy`, builds it and runs
/// `tests`. Shared by the pipeline and by checks that need a plain run.
pub fn run_copy(
    project_root: &Path,
    work: &Path,
    files: &std::collections::BTreeMap<String, String>,
    tests: &[TestCase],
    traced: BTreeSet<ElementId>,
    element_count: usize,
    config: &RunnerConfig,
) -> Result<(DynamicTrace, Vec<String>), PipelineError> {
    let copy = work.join("project");
    write_copy(project_root, &copy, files).map_err(io(&copy))?;
    isolate_manifest(&copy)?;
    let built = build(&copy, &work.join("target"))?;
    Ok(execute_tests(&built, tests, traced, element_count, &work.join("traces"), config)?)
}

pub fn analyze(opts: &AnalyzeOptions) -> Result<Analysis, PipelineError> {
    if !opts.project.join("Cargo.toml").is_file() {
        return Err(FrontendError::ProjectNotFound(opts.project.display().to_string()).into());
    }
    let root = opts.project.canonicalize().map_err(io(&opts.project))?;
    let registry = match &opts.analyzers {
        Some(names) => AnalyzerRegistry::builtin().select(names)?,
        None => AnalyzerRegistry::builtin(),
    };
    let project = build_model(&root)?;
    let rules = load_rules(&root)?;
    let model = &project.model;
    let tests = select_tests(model, &rules, opts.tests.as_deref());
    let helpers = detect_helpers(model, &rules);
    let targets = instrumentation_targets(model, &tests, &helpers);
    let instrumented = instrument_sources(model, &targets);
    let mut warnings = project.warnings.clone();
    warnings.extend(instrumented.warnings.iter().cloned());

    let work = opts.work_dir.clone().unwrap_or_else(|| root.join("target").join("rtj"));
    let (trace, run_warnings) = if tests.is_empty() {
        (DynamicTrace::new(instrumented.traced.clone(), run_metadata()), Vec::new())
    } else {
        run_copy(&root, &work, &instrumented.files, &tests, instrumented.traced.clone(), model.element_count(), &opts.runner)?
    };
    warnings.extend(run_warnings);
    let copy = work.join("project");
    let copy = if opts.keep_instrumented {
        Some(copy)
    } else {
        if copy.exists() {
            std::fs::remove_dir_all(&copy).map_err(io(&copy))?;
        }
        None
    };

    let inputs = Inputs { model, rules: &rules, helpers: &helpers, policy: opts.policy };
    let output = run_pipeline(&inputs, &tests, &trace, &registry);
    warnings.extend(output.diagnostics.iter().map(|d| format!("{}: {}: {}", d.test, d.analyzer, d.message)));
    let info = ProjectInfo { root: root.display().to_string(), name: project.package.name.clone() };
    let report = build_report(info, &tests, &trace, &output.labels, &output.refactors);
    Ok(Analysis { project, rules, tests, helpers, instrumented, trace, output, report, warnings, copy })
}
