//! The serializable analysis report and its summary.
//!
//! The summary is a pure function of the `tests` array, so a reader can
//! recompute it from a parsed report and compare.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::analysis::{Category, Label};
use crate::query::TestCase;
use crate::refactor::RefactoringProposal;
use crate::trace::{DynamicTrace, TestStatus};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectInfo {
    pub root: String,
    pub name: String,
}

/// Run metadata minus wall-clock fields, which would make reports of
/// identical runs differ.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunInfo {
    pub framework_version: String,
    pub instrumentation_version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportTest {
    pub name: String,
    pub file: String,
    pub line: u32,
    /// `None` when the test was discovered but not run.
    pub outcome: Option<TestStatus>,
    pub labels: Vec<Label>,
    pub proposals: Vec<RefactoringProposal>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    /// Tests carrying each rotten or smoke category, zeros included.
    pub categories: BTreeMap<String, u64>,
    pub special_cases: BTreeMap<String, u64>,
    /// Distinct tests with at least one rotten category.
    pub rotten_tests: u64,
    /// Tests that passed and were therefore analyzed.
    pub analyzed_tests: u64,
}

impl Summary {
    pub fn recompute(tests: &[ReportTest]) -> Self {
        let mut summary = Summary::default();
        for c in Category::ALL {
            let target = if c == Category::BothBranchesContextDependent {
                &mut summary.special_cases
            } else {
                &mut summary.categories
            };
            target.insert(c.as_str().to_string(), 0);
        }
        for t in tests {
            if t.outcome == Some(TestStatus::Pass) {
                summary.analyzed_tests += 1;
            }
            let cats: BTreeSet<Category> = t.labels.iter().map(|l| l.category).collect();
            for c in &cats {
                let target = if *c == Category::BothBranchesContextDependent {
                    &mut summary.special_cases
                } else {
                    &mut summary.categories
                };
                *target.entry(c.as_str().to_string()).or_default() += 1;
            }
            if cats.iter().any(|c| c.is_rotten()) {
                summary.rotten_tests += 1;
            }
        }
        summary
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub project: ProjectInfo,
    pub run: RunInfo,
    pub tests: Vec<ReportTest>,
    pub summary: Summary,
}

impl Report {
    pub fn has_rotten(&self) -> bool {
        self.summary.rotten_tests > 0
    }

    pub fn labels(&self) -> impl Iterator<Item = &Label> {
        self.tests.iter().flat_map(|t| t.labels.iter())
    }
}

/// Assembles the report: one entry per discovered test ordered by
/// (file, line, name), labels ordered by category name then evidence.
pub fn build_report(
    project: ProjectInfo,
    tests: &[TestCase],
    trace: &DynamicTrace,
    labels: &[Label],
    proposals: &[RefactoringProposal],
) -> Report {
    let mut entries: Vec<ReportTest> = tests
        .iter()
        .map(|t| {
            let mut own: Vec<Label> = labels.iter().filter(|l| l.test == t.name).cloned().collect();
            own.sort_by(|a, b| {
                (a.category.as_str(), &a.analyzer, &a.evidence_key()).cmp(&(
                    b.category.as_str(),
                    &b.analyzer,
                    &b.evidence_key(),
                ))
            });
            ReportTest {
                name: t.name.clone(),
                file: t.unit.clone(),
                line: t.line,
                outcome: trace.status(&t.name),
                labels: own,
                proposals: proposals.iter().filter(|p| p.test == t.name).cloned().collect(),
            }
        })
        .collect();
    entries.sort_by(|a, b| (&a.file, a.line, &a.name).cmp(&(&b.file, b.line, &b.name)));
    let summary = Summary::recompute(&entries);
    Report {
        schema_version: SCHEMA_VERSION,
        project,
        run: RunInfo {
            framework_version: trace.run_metadata.framework_version.clone(),
            instrumentation_version: trace.run_metadata.instrumentation_version.clone(),
        },
        tests: entries,
        summary,
    }
}

impl Label {
    fn evidence_key(&self) -> Vec<(u32, u32)> {
        self.evidence.iter().map(|e| (e.line, e.element_id.0)).collect()
    }
}
