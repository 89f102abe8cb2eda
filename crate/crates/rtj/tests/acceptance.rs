//! End-to-end acceptance checks over the bundled fixtures. Prints one
//! PASS/FAIL line per criterion and exits non-zero if any fails.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::AssertUnwindSafe;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtj::frontend::{build_model, walker::LineIndex};
use rtj::instrument::{instrument_sources, write_copy};
use rtj::pipeline::{instrumentation_targets, run_copy, select_tests};
use rtj::report::{parse_report, render_json};
use rtj::runner::{build, execute_tests, isolate_manifest, RunnerConfig};
use rtj::{analyze, apply, AnalyzeOptions, Analysis};
use rtj_core::analysis::{run_pipeline, AnalyzerRegistry, Category, Inputs, Label};
use rtj_core::model::Probe;
use rtj_core::query::{classify_call, detect_helpers, is_test_method, CallClass, TestCase};
use rtj_core::refactor::{RefactorKind, RefactorPolicy};
use rtj_core::report::{build_report, ProjectInfo, Report, Summary};
use rtj_core::trace::TestStatus;
use rtj_core::{DynamicTrace, ElementId, ProgramModel, Rules};
use syn::visit::Visit;

type Outcome = Result<String, String>;
type Outcomes = BTreeMap<String, TestStatus>;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

struct Scratch {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Scratch {
    fn new() -> Self {
        let dir = tempfile::tempdir().expect("tempdir");
        let root = dir.path().to_path_buf();
        Self { _dir: dir, root }
    }

    /// A fresh copy of a fixture package under `<scratch>/<as_name>`.
    fn copy(&self, name: &str, as_name: &str) -> PathBuf {
        let dest = self.root.join(as_name);
        write_copy(&fixture(name), &dest, &BTreeMap::new()).expect("copy fixture");
        dest
    }
}

fn options(project: &Path, policy: RefactorPolicy) -> AnalyzeOptions {
    AnalyzeOptions { policy, ..AnalyzeOptions::new(project) }
}

fn outcomes(trace: &DynamicTrace) -> Outcomes {
    trace.outcomes.iter().map(|(k, v)| (k.clone(), v.status)).collect()
}

/// Runs the package's tests without instrumentation.
fn plain_run(project: &Path, work: &Path) -> Result<Outcomes, String> {
    let p = build_model(project).map_err(|e| e.to_string())?;
    let tests = select_tests(&p.model, &Rules::default(), None);
    let (trace, _) = run_copy(project, work, &BTreeMap::new(), &tests, BTreeSet::new(), p.model.element_count(), &RunnerConfig::default())
        .map_err(|e| e.to_string())?;
    Ok(outcomes(&trace))
}

fn check_summary(report: &Report, what: &str) -> Result<(), String> {
    if Summary::recompute(&report.tests) != report.summary {
        return Err(format!("{what}: embedded summary differs from the recomputed one"));
    }
    let parsed = parse_report(&render_json(report)).map_err(|e| format!("{what}: {e}"))?;
    if Summary::recompute(&parsed.tests) != parsed.summary || &parsed != report {
        return Err(format!("{what}: report does not survive a JSON round trip"));
    }
    Ok(())
}

fn golden_line(l: &Label) -> String {
    let ev: Vec<String> = l.evidence.iter().map(|e| format!("{}:{}:{}", e.file, e.line, e.hits)).collect();
    format!("{}\t{}\t{}\t{}", l.test, l.category, l.analyzer, ev.join(","))
}

fn label_lines(report: &Report) -> BTreeSet<String> {
    report.labels().map(golden_line).collect()
}

struct Suite {
    scratch: Scratch,
    corpus: PathBuf,
    baseline: Analysis,
    reports: Vec<(String, Report)>,
    mutants: Vec<(Report, DynamicTrace)>,
    plain: Option<Outcomes>,
}

impl Suite {
    fn plain(&mut self) -> Result<Outcomes, String> {
        if self.plain.is_none() {
            self.plain = Some(plain_run(&self.corpus, &self.scratch.root.join("work-plain"))?);
        }
        Ok(self.plain.clone().unwrap())
    }
}

fn golden_corpus(s: &mut Suite, elapsed: f64) -> Outcome {
    let text = std::fs::read_to_string(fixture("corpus.golden")).map_err(|e| e.to_string())?;
    let golden: BTreeSet<String> = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty()).map(str::to_string).collect();
    let r = &s.baseline.report;
    let categories: BTreeSet<Category> = r.labels().map(|l| l.category).collect();
    let clean_passing = r.tests.iter().filter(|t| t.outcome == Some(TestStatus::Pass) && t.labels.is_empty()).count();
    let failing = r.tests.iter().filter(|t| t.outcome == Some(TestStatus::Fail)).count();
    if r.tests.len() < 14 || categories.len() != Category::ALL.len() || clean_passing < 3 || failing < 1 {
        return Err(format!(
            "corpus shape: {} tests, {} categories, {clean_passing} clean passing, {failing} failing",
            r.tests.len(),
            categories.len()
        ));
    }
    let got = label_lines(r);
    let missing: Vec<_> = golden.difference(&got).collect();
    let spurious: Vec<_> = got.difference(&golden).collect();
    if !missing.is_empty() || !spurious.is_empty() {
        return Err(format!("missing {missing:?}, spurious {spurious:?}"));
    }
    if elapsed > 120.0 {
        return Err(format!("took {elapsed:.1}s"));
    }
    Ok(format!("{} labels on {} tests, {elapsed:.1}s", got.len(), r.tests.len()))
}

/// Byte spans of `if` conditions that can be negated.
struct Guards(Vec<(usize, usize)>, String);

impl<'a> Visit<'a> for Guards {
    fn visit_expr_if(&mut self, e: &'a syn::ExprIf) {
        if !matches!(*e.cond, syn::Expr::Let(_)) {
            let idx = LineIndex::new(&self.1);
            let span = syn::spanned::Spanned::span(&*e.cond);
            let s = idx.span(span);
            self.0.push((s.start, s.end));
        }
        syn::visit::visit_expr_if(self, e);
    }
}

fn rust_files(project: &Path) -> Vec<String> {
    let model = build_model(project).expect("model").model;
    model.units().iter().map(|u| u.path.clone()).collect()
}

/// Rewrites every guard `c` into `((c) != guard_k_set)`, where `guard_k_set`
/// reads an environment variable, so one build serves every mutant.
fn guard_schema(project: &Path) -> Result<(BTreeMap<String, String>, usize), String> {
    let mut files = BTreeMap::new();
    let mut k = 0;
    for rel in rust_files(project) {
        let source = std::fs::read_to_string(project.join(&rel)).map_err(|e| e.to_string())?;
        let file = syn::parse_file(&source).map_err(|e| e.to_string())?;
        let mut g = Guards(Vec::new(), source.clone());
        g.visit_file(&file);
        if g.0.is_empty() {
            continue;
        }
        g.0.sort();
        let mut out = String::new();
        let mut pos = 0;
        for (start, end) in g.0 {
            out.push_str(&source[pos..start]);
            out.push_str(&format!("(({}) != ::std::env::var_os(\"RTJ_GUARD_{k}\").is_some())", &source[start..end]));
            pos = end;
            k += 1;
        }
        out.push_str(&source[pos..]);
        files.insert(rel, out);
    }
    Ok((files, k))
}

fn green_only(s: &mut Suite) -> Outcome {
    let schema_root = s.scratch.root.join("schema");
    let (files, guards) = guard_schema(&s.corpus)?;
    write_copy(&s.corpus, &schema_root, &files).map_err(|e| e.to_string())?;
    let project = build_model(&schema_root).map_err(|e| e.to_string())?;
    let model = &project.model;
    let rules = Rules::default();
    let tests = select_tests(model, &rules, None);
    let helpers = detect_helpers(model, &rules);
    let instrumented = instrument_sources(model, &instrumentation_targets(model, &tests, &helpers));
    let work = s.scratch.root.join("work-schema");
    let copy = work.join("project");
    write_copy(&schema_root, &copy, &instrumented.files).map_err(|e| e.to_string())?;
    isolate_manifest(&copy).map_err(|e| e.to_string())?;
    let built = build(&copy, &work.join("target")).map_err(|e| e.to_string())?;
    let registry = AnalyzerRegistry::builtin();
    let inputs = Inputs { model, rules: &rules, helpers: &helpers, policy: RefactorPolicy::ALL };
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut with_failures, mut labels_seen) = (0, 0);
    for i in 0..100 {
        let mut config = RunnerConfig::default();
        for g in 0..guards {
            if rng.random_bool(0.5) {
                config.env.push((format!("RTJ_GUARD_{g}"), "1".into()));
            }
        }
        let (trace, _) = execute_tests(&built, &tests, instrumented.traced.clone(), model.element_count(), &work.join("traces"), &config)
            .map_err(|e| format!("mutant {i}: {e}"))?;
        let out = run_pipeline(&inputs, &tests, &trace, &registry);
        let info = ProjectInfo { root: schema_root.display().to_string(), name: project.package.name.clone() };
        let report = build_report(info, &tests, &trace, &out.labels, &out.refactors);
        for l in &out.labels {
            if trace.status(&l.test) != Some(TestStatus::Pass) {
                return Err(format!("mutant {i}: {} labeled {} with outcome {:?}", l.test, l.category, trace.status(&l.test)));
            }
        }
        with_failures += usize::from(trace.outcomes.values().filter(|o| o.status == TestStatus::Fail).count() > 1);
        labels_seen += out.labels.len();
        s.mutants.push((report, trace));
    }
    Ok(format!("100 mutants over {guards} guards, {with_failures} with extra failures, {labels_seen} labels"))
}

fn evidence_holds(report: &Report, trace: &DynamicTrace) -> Result<usize, String> {
    let mut checked = 0;
    for l in report.labels() {
        if l.category.is_static() {
            continue;
        }
        let zero = l.evidence.iter().any(|e| e.hits == 0 && trace.hits_of(&l.test, e.element_id) == Ok(0));
        if !zero {
            return Err(format!("{} {}: no unexecuted evidence", l.test, l.category));
        }
        checked += 1;
    }
    Ok(checked)
}

fn evidence_invariant(s: &mut Suite) -> Outcome {
    let n = evidence_holds(&s.baseline.report, &s.baseline.trace)?;
    let mut m = 0;
    for (i, (report, trace)) in s.mutants.iter().enumerate() {
        m += evidence_holds(report, trace).map_err(|e| format!("mutant {i}: {e}"))?;
    }
    Ok(format!("{n} labels on the corpus, {m} across {} mutants", s.mutants.len()))
}

fn outcome_preservation(s: &mut Suite) -> Outcome {
    let plain = s.plain()?;
    let traced = outcomes(&s.baseline.trace);
    if plain != traced {
        return Err(format!("plain {plain:?} vs instrumented {traced:?}"));
    }
    Ok(format!("{} tests, identical outcomes", plain.len()))
}

fn apply_kind(s: &mut Suite, kind: RefactorKind, as_name: &str) -> Result<(PathBuf, Vec<String>), String> {
    let dest = s.scratch.copy("corpus", as_name);
    let proposals: Vec<_> = s.baseline.output.refactors.iter().filter(|p| p.kind == kind).cloned().collect();
    if proposals.is_empty() {
        return Err(format!("no {kind:?} proposals"));
    }
    let plan = apply::plan(&dest, &proposals).map_err(|e| e.to_string())?;
    if !plan.skipped.is_empty() {
        return Err(format!("skipped proposals: {:?}", plan.skipped));
    }
    apply::write(&dest, &plan).map_err(|e| e.to_string())?;
    Ok((dest, proposals.iter().map(|p| p.test.clone()).collect()))
}

fn replace_forced_fail(s: &mut Suite) -> Outcome {
    let before = s.plain()?;
    let (dest, fixed) = apply_kind(s, RefactorKind::ReplaceForcedFail, "corpus-fix")?;
    let after = plain_run(&dest, &s.scratch.root.join("work-fix"))?;
    let mut flipped = 0;
    for (test, status) in &before {
        let executed = s
            .baseline
            .output
            .refactors
            .iter()
            .filter(|p| &p.test == test && p.kind == RefactorKind::ReplaceForcedFail)
            .any(|p| p.rationale.evidence.iter().any(|e| e.hits > 0));
        let expected = if executed { TestStatus::Fail } else { *status };
        if after.get(test) != Some(&expected) {
            return Err(format!("{test}: expected {expected:?}, got {:?}", after.get(test)));
        }
        flipped += usize::from(executed && *status == TestStatus::Pass);
    }
    if flipped == 0 {
        return Err("no fixed site was executed".into());
    }
    Ok(format!("{} fixes, {flipped} executed site flipped to fail, rest unchanged", fixed.len()))
}

fn todo_preserves(s: &mut Suite) -> Outcome {
    let before = s.plain()?;
    let (dest, annotated) = apply_kind(s, RefactorKind::AddTodoComment, "corpus-todo")?;
    let after = plain_run(&dest, &s.scratch.root.join("work-todo"))?;
    if before != after {
        return Err(format!("outcomes changed: {before:?} vs {after:?}"));
    }
    Ok(format!("{} TODO proposals applied, outcomes identical", annotated.len()))
}

fn determinism(s: &mut Suite) -> Outcome {
    let again = analyze(&options(&s.corpus, RefactorPolicy::ALL)).map_err(|e| e.to_string())?;
    let (a, b) = (render_json(&s.baseline.report), render_json(&again.report));
    s.reports.push(("second run".into(), again.report));
    if a != b {
        return Err("reports differ".into());
    }
    Ok(format!("{} bytes, identical", a.len()))
}

/// Relaxes depth estimates over the whole call relation until nothing
/// changes, independently of the breadth-first construction.
fn helper_oracle(model: &ProgramModel, rules: &Rules) -> BTreeMap<ElementId, u32> {
    let mut depth: BTreeMap<ElementId, u32> = BTreeMap::new();
    let mut changed = true;
    while changed {
        changed = false;
        for m in model.methods() {
            if is_test_method(m, rules) {
                continue;
            }
            let mut best: Option<u32> = None;
            for id in &m.nodes {
                let candidate = match classify_call(model.node(*id).unwrap(), rules) {
                    CallClass::Assertion(_) => Some(0),
                    CallClass::Project(_, callee) => depth.get(&callee).map(|d| d + 1),
                    CallClass::Other => None,
                };
                best = match (best, candidate) {
                    (Some(a), Some(b)) => Some(a.min(b)),
                    (a, b) => a.or(b),
                };
            }
            if let Some(d) = best {
                if depth.get(&m.id) != Some(&d) {
                    depth.insert(m.id, d);
                    changed = true;
                }
            }
        }
    }
    depth
}

fn helper_fixpoint(s: &mut Suite) -> Outcome {
    let model = &s.baseline.project.model;
    let oracle = helper_oracle(model, &s.baseline.rules);
    if oracle != s.baseline.helpers {
        return Err(format!("oracle {oracle:?} vs detect_helpers {:?}", s.baseline.helpers));
    }
    let deep = oracle.values().filter(|d| **d > 0).count();
    if deep == 0 {
        return Err("corpus has no transitive helper".into());
    }
    Ok(format!("{} helpers ({deep} transitive), equal", oracle.len()))
}

/// Label identity that survives element renumbering.
fn projection(report: &Report) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    for l in report.labels() {
        *out.entry(golden_line(l)).or_default() += 1;
    }
    out
}

fn sensitivity(s: &mut Suite) -> Outcome {
    let model = &s.baseline.project.model;
    let clean: Vec<&TestCase> = s
        .baseline
        .tests
        .iter()
        .filter(|t| s.baseline.trace.status(&t.name) == Some(TestStatus::Pass))
        .filter(|t| s.baseline.report.labels().all(|l| l.test != t.name))
        .collect();
    let dest = s.scratch.copy("corpus", "corpus-inject");
    let mut inserts: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut expected = projection(&s.baseline.report);
    for t in &clean {
        let m = model.method(t.method_ref).unwrap();
        let Probe::BlockEntry(brace) = m.entry_probe else { return Err(format!("{}: no body brace", t.name)) };
        let unit = model.unit_of(m);
        let inserted = brace + 1;
        inserts.entry(unit.path.clone()).or_default().push(inserted);
        let (line, _) = unit.line_col(brace);
        let lbl = format!("{}\t{}\tassertion-rotten\t{}:{}:0", t.name, Category::ContextDependentAssertion, unit.path, line);
        *expected.entry(lbl).or_default() += 1;
    }
    for (file, mut offsets) in inserts {
        offsets.sort();
        offsets.dedup();
        let path = dest.join(&file);
        let mut text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
        for o in offsets.into_iter().rev() {
            text.insert_str(o, " if false { assert!(true); }");
        }
        std::fs::write(&path, text).map_err(|e| e.to_string())?;
    }
    let injected = analyze(&options(&dest, RefactorPolicy::ALL)).map_err(|e| e.to_string())?;
    let got = projection(&injected.report);
    s.reports.push(("injected".into(), injected.report));
    if got != expected {
        let missing: Vec<_> = expected.keys().filter(|k| got.get(*k) != expected.get(*k)).collect();
        let extra: Vec<_> = got.keys().filter(|k| got.get(*k) != expected.get(*k)).collect();
        return Err(format!("expected but missing {missing:?}; got instead {extra:?}"));
    }
    Ok(format!("{} clean tests injected, one new context-dependent label each", clean.len()))
}

fn exit_code(project: &Path, out: &Path) -> Result<(i32, Option<Report>), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_rtj"))
        .arg("analyze")
        .arg(project)
        .arg("--out")
        .arg(out)
        .output()
        .map_err(|e| e.to_string())?;
    let code = status.status.code().ok_or("killed by signal")?;
    let report = std::fs::read_to_string(out).ok().map(|t| parse_report(&t).map_err(|e| e.to_string())).transpose()?;
    Ok((code, report))
}

fn round_trip(s: &mut Suite) -> Outcome {
    let mut checked = 1;
    check_summary(&s.baseline.report, "corpus")?;
    for (what, r) in &s.reports {
        check_summary(r, what)?;
        checked += 1;
    }
    for (i, (r, _)) in s.mutants.iter().enumerate() {
        check_summary(r, &format!("mutant {i}"))?;
        checked += 1;
    }
    let clean = s.scratch.copy("clean", "clean");
    let cases = [
        (s.corpus.clone(), 1, "corpus"),
        (clean, 0, "clean"),
        (s.scratch.root.join("does-not-exist"), 2, "missing project"),
    ];
    for (project, want, what) in cases {
        let out = s.scratch.root.join(format!("{what}.json"));
        let (code, report) = exit_code(&project, &out)?;
        if code != want {
            return Err(format!("{what}: exit {code}, expected {want}"));
        }
        if let Some(r) = report {
            check_summary(&r, what)?;
            checked += 1;
        }
    }
    Ok(format!("{checked} reports recompute, exit codes 1/0/2"))
}

fn main() {
    let scratch = Scratch::new();
    let corpus = scratch.copy("corpus", "corpus");
    let start = Instant::now();
    let baseline = match analyze(&options(&corpus, RefactorPolicy::ALL)) {
        Ok(a) => a,
        Err(e) => {
            println!("FAIL: corpus analysis did not complete: {e}");
            std::process::exit(1);
        }
    };
    let elapsed = start.elapsed().as_secs_f64();
    let mut suite = Suite { scratch, corpus, baseline, reports: Vec::new(), mutants: Vec::new(), plain: None };

    type Check = Box<dyn Fn(&mut Suite) -> Outcome>;
    let criteria: Vec<(&str, Check)> = vec![
        ("golden fixture corpus", Box::new(move |s| golden_corpus(s, elapsed))),
        ("green-only invariant under guard mutations", Box::new(green_only)),
        ("evidence invariant", Box::new(evidence_invariant)),
        ("outcome preservation under instrumentation", Box::new(outcome_preservation)),
        ("forced-fail replacement", Box::new(replace_forced_fail)),
        ("TODO annotation preserves behavior", Box::new(todo_preserves)),
        ("determinism", Box::new(determinism)),
        ("helper fixpoint oracle", Box::new(helper_fixpoint)),
        ("sensitivity to a constant-false guard", Box::new(sensitivity)),
        ("report round trip and exit codes", Box::new(round_trip)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let result = std::panic::catch_unwind(AssertUnwindSafe(|| check(&mut suite)))
            .unwrap_or_else(|p| Err(p.downcast_ref::<String>().cloned().unwrap_or_else(|| "panicked".into())));
        match result {
            Ok(detail) => println!("criterion {:>2} PASS  {name}: {detail} [{:.1}s]", i + 1, t.elapsed().as_secs_f64()),
            Err(why) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {why}", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
