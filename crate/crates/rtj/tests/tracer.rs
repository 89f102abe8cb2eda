use std::time::Duration;

use rtj::{analyze, Analysis, AnalyzeOptions};
use rtj_core::model::Probe;
use rtj_core::trace::{TestStatus, TraceError};
use rtj_core::query::TestCase;
use rtj_core::ElementId;

const LIB: &str = r#"pub fn items() -> Vec<u32> {
    Vec::new()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_loop() {
        for i in items() {
            assert!(i > 0);
        }
    }

    #[test]
    fn guarded() {
        if items().is_empty() {
            return;
        }
        assert_eq!(items().len(), 1);
    }

    #[test]
    fn executed() {
        let n = items().len();
        assert_eq!(n, 0);
    }

    #[test]
    fn fails() {
        assert_eq!(items().len(), 3);
    }

    #[test]
    #[ignore]
    fn ignored() {
        assert!(items().is_empty());
    }

    #[test]
    fn spins() {
        loop {
            std::thread::sleep(std::time::Duration::from_millis(20));
        }
    }
}
"#;

fn run() -> (tempfile::TempDir, Analysis) {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("Cargo.toml"), "[package]\nname = \"probe\"\nversion = \"0.1.0\"\nedition = \"2021\"\n").unwrap();
    std::fs::create_dir_all(dir.path().join("src")).unwrap();
    std::fs::write(dir.path().join("src/lib.rs"), LIB).unwrap();
    let mut opts = AnalyzeOptions::new(dir.path());
    opts.runner.timeout = Duration::from_secs(3);
    opts.work_dir = Some(dir.path().join("work"));
    let analysis = analyze(&opts).unwrap();
    (dir, analysis)
}

fn case<'a>(a: &'a Analysis, name: &str) -> &'a TestCase {
    a.tests.iter().find(|t| t.harness_path == format!("tests::{name}")).unwrap()
}

fn at_line(a: &Analysis, test: &TestCase, line: u32) -> ElementId {
    let m = &a.project.model;
    m.nodes().iter().filter(|n| n.method == test.method_ref && n.location.line == line).map(|n| n.id).next().unwrap()
}

fn hits(a: &Analysis, name: &str, line: u32) -> u64 {
    let t = case(a, name);
    a.trace.was_executed(t, at_line(a, t, line)).unwrap()
}

/// One project build serves every check; each build costs seconds.
#[test]
fn traces_match_execution() {
    let (_dir, a) = run();
    let status = |n: &str| a.trace.status(&case(&a, n).name).unwrap();
    assert_eq!(status("empty_loop"), TestStatus::Pass);
    assert_eq!(status("fails"), TestStatus::Fail);
    assert_eq!(status("ignored"), TestStatus::FrameworkSkipped);
    assert_eq!(status("spins"), TestStatus::Error, "timeout");
    assert!(a.warnings.iter().any(|w| w.contains("spins")), "{:?}", a.warnings);

    assert_eq!(hits(&a, "empty_loop", 12), 0, "body of a loop over nothing");
    assert_eq!(hits(&a, "guarded", 19), 1);
    assert_eq!(hits(&a, "guarded", 21), 0, "code after a taken guard");
    assert_eq!(hits(&a, "executed", 27), 1);
    let spins = case(&a, "spins");
    assert_eq!(a.trace.was_executed(spins, at_line(&a, spins, 44)), Ok(0), "killed runs leave no hits");

    let m = &a.project.model;
    let untraced = m.methods().iter().find(|x| x.name == "items").unwrap().id;
    assert_eq!(a.trace.hits_of(&case(&a, "executed").name, untraced), Err(TraceError::UntracedElement(untraced)));

    // A probed node that ran implies its enclosing probed blocks ran.
    for t in &a.tests {
        for n in m.nodes().iter().filter(|n| n.method == t.method_ref && a.trace.traced.contains(&n.id)) {
            if a.trace.hits_of(&t.name, n.id).unwrap() == 0 {
                continue;
            }
            for up in m.ancestors(n.id).filter(|up| matches!(up.probe, Probe::BlockEntry(_))) {
                assert!(a.trace.hits_of(&t.name, up.id).unwrap() > 0, "{} ran without its block in {}", n.location.line, t.name);
            }
        }
    }

    assert!(a.copy.is_none(), "instrumented copy is removed");
}
