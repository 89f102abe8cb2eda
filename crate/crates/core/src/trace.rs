//! Dynamic facts: per-test outcome and per-test element hit counts.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;

use serde::{Deserialize, Serialize};

use crate::model::ElementId;
use crate::query::TestCase;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestStatus {
    Pass,
    Fail,
    Error,
    FrameworkSkipped,
}

impl TestStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            TestStatus::Pass => "pass",
            TestStatus::Fail => "fail",
            TestStatus::Error => "error",
            TestStatus::FrameworkSkipped => "framework-skipped",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestOutcome {
    pub test: String,
    pub status: TestStatus,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunMetadata {
    /// Seconds since the Unix epoch at the start of the run.
    pub timestamp: u64,
    pub framework_version: String,
    pub instrumentation_version: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("element {0} was not instrumented")]
    UntracedElement(ElementId),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DynamicTrace {
    pub outcomes: BTreeMap<String, TestOutcome>,
    /// Non-zero counts only; absence means zero.
    pub hits: BTreeMap<String, BTreeMap<ElementId, u64>>,
    /// Elements that carried a probe during the run.
    pub traced: BTreeSet<ElementId>,
    pub run_metadata: RunMetadata,
}

impl DynamicTrace {
    pub fn new(traced: BTreeSet<ElementId>, run_metadata: RunMetadata) -> Self {
        Self { traced, run_metadata, ..Self::default() }
    }

    pub fn record_outcome(&mut self, outcome: TestOutcome) {
        self.outcomes.insert(outcome.test.clone(), outcome);
    }

    pub fn add_hits(&mut self, test: &str, element: ElementId, count: u64) {
        if count == 0 {
            return;
        }
        *self.hits.entry(test.into()).or_default().entry(element).or_default() += count;
    }

    pub fn outcome(&self, test: &str) -> Option<&TestOutcome> {
        self.outcomes.get(test)
    }

    pub fn status(&self, test: &str) -> Option<TestStatus> {
        self.outcome(test).map(|o| o.status)
    }

    /// Hit count of an instrumented element under one test.
    pub fn hits_of(&self, test: &str, element: ElementId) -> Result<u64, TraceError> {
        if !self.traced.contains(&element) {
            return Err(TraceError::UntracedElement(element));
        }
        Ok(self.hits.get(test).and_then(|h| h.get(&element)).copied().unwrap_or(0))
    }

    pub fn was_executed(&self, test: &TestCase, element: ElementId) -> Result<u64, TraceError> {
        self.hits_of(&test.name, element)
    }
}
