//! Analyzer framework and the per-test analysis loop.
//!
//! Every analyzer answers four questions about a test, in order: which
//! elements it cares about ([`TestAnalyzer::find_elements`]), how often
//! each ran ([`TestAnalyzer::dynamic_analysis`]), which labels follow
//! ([`TestAnalyzer::label_test`]) and which edits it proposes
//! ([`TestAnalyzer::apply_refactor`]). Analyzers see the results of the
//! analyzers that ran before them on the same test, which is how the
//! both-branches detector suppresses plain context-dependent labels.

mod builtin;

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{ElementId, ProgramModel, SourceLocation};
use crate::query::{AssertionCallSite, GuardReturn, HelperCallSite, HelperMap, QueryError, TestCase};
use crate::refactor::{RefactorError, RefactorPolicy, RefactoringProposal};
use crate::rules::Rules;
use crate::trace::{DynamicTrace, TestStatus};

pub use builtin::{
    classify_assertion_in_helper, classify_assertion_rotten, classify_helper_call_rotten, classify_missed_fail,
    classify_skip, classify_smoke, detect_both_branches, AssertionInHelperAnalyzer, AssertionRottenAnalyzer,
    BothBranchesAnalyzer, HelperCallRottenAnalyzer, MissedFailAnalyzer, SkipAnalyzer, SmokeAnalyzer,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    ContextDependentAssertion,
    ContextDependentHelperCall,
    FullyRottenAssertion,
    FullyRottenHelperCall,
    RottenAssertionInHelper,
    Skip,
    MissedFail,
    Smoke,
    BothBranchesContextDependent,
}

impl Category {
    pub const ALL: [Category; 9] = [
        Category::ContextDependentAssertion,
        Category::ContextDependentHelperCall,
        Category::FullyRottenAssertion,
        Category::FullyRottenHelperCall,
        Category::RottenAssertionInHelper,
        Category::Skip,
        Category::MissedFail,
        Category::Smoke,
        Category::BothBranchesContextDependent,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Category::ContextDependentAssertion => "ContextDependentAssertion",
            Category::ContextDependentHelperCall => "ContextDependentHelperCall",
            Category::FullyRottenAssertion => "FullyRottenAssertion",
            Category::FullyRottenHelperCall => "FullyRottenHelperCall",
            Category::RottenAssertionInHelper => "RottenAssertionInHelper",
            Category::Skip => "Skip",
            Category::MissedFail => "MissedFail",
            Category::Smoke => "Smoke",
            Category::BothBranchesContextDependent => "BothBranchesContextDependent",
        }
    }

    pub fn parse(s: &str) -> Option<Category> {
        Category::ALL.into_iter().find(|c| c.as_str() == s)
    }

    /// Smoke tests are not rotten, and the both-branches case is reported
    /// as a special case rather than a rotten test.
    pub fn is_rotten(self) -> bool {
        !matches!(self, Category::Smoke | Category::BothBranchesContextDependent)
    }

    /// Categories whose evidence need not contain an unexecuted element.
    pub fn is_static(self) -> bool {
        matches!(self, Category::MissedFail | Category::Smoke)
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Evidence {
    pub element_id: ElementId,
    pub file: String,
    pub line: u32,
    pub hits: u64,
}

impl Evidence {
    pub fn new(site: &SourceLocation, hits: u64) -> Self {
        Self { element_id: site.element_id, file: site.file.clone(), line: site.line, hits }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Label {
    pub test: String,
    pub category: Category,
    pub evidence: Vec<Evidence>,
    pub analyzer: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AnalyzerError {
    #[error(transparent)]
    Query(#[from] QueryError),
    #[error(transparent)]
    Refactor(#[from] RefactorError),
    #[error("{0}")]
    Other(String),
}

/// Immutable inputs shared by every analyzer.
#[derive(Debug, Clone, Copy)]
pub struct Inputs<'a> {
    pub model: &'a ProgramModel,
    pub rules: &'a Rules,
    pub helpers: &'a HelperMap,
    pub policy: RefactorPolicy,
}

/// Both branches of an `if` with assertion or helper-call sites in each.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BranchPair {
    pub conditional: ElementId,
    pub then_elements: Vec<ElementId>,
    pub else_elements: Vec<ElementId>,
    pub then_sites: Vec<SourceLocation>,
    pub else_sites: Vec<SourceLocation>,
}

/// Assertions and helper calls inside one helper reachable from a test.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HelperBody {
    pub helper: ElementId,
    pub assertions: Vec<AssertionCallSite>,
    pub helper_calls: Vec<HelperCallSite>,
}

/// Static elements found by one analyzer for one test. Each analyzer fills
/// the parts it needs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StaticElements {
    pub assertions: Vec<AssertionCallSite>,
    pub helper_calls: Vec<HelperCallSite>,
    pub guards: Vec<GuardReturn>,
    pub branch_pairs: Vec<BranchPair>,
    pub helper_bodies: Vec<HelperBody>,
}

/// Hit counts of the analyzer's elements (instrumented elements only) plus
/// sites it asks later analyzers to leave alone.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DynamicFacts {
    pub hits: BTreeMap<ElementId, u64>,
    pub suppressed: BTreeSet<ElementId>,
}

impl DynamicFacts {
    pub fn hits(&self, id: ElementId) -> Option<u64> {
        self.hits.get(&id).copied()
    }

    /// Looks up each element in the trace; untraced elements are left out.
    pub fn collect(trace: &DynamicTrace, test: &TestCase, ids: impl IntoIterator<Item = ElementId>) -> Self {
        let hits = ids.into_iter().filter_map(|id| trace.was_executed(test, id).ok().map(|h| (id, h))).collect();
        Self { hits, suppressed: BTreeSet::new() }
    }
}

/// Results of earlier analyzers on the current test, keyed by analyzer name.
pub type StaticResults = BTreeMap<&'static str, StaticElements>;
pub type DynamicResults = BTreeMap<&'static str, DynamicFacts>;

pub trait TestAnalyzer {
    fn name(&self) -> &'static str;

    fn find_elements(
        &self,
        inputs: &Inputs<'_>,
        prior: &StaticResults,
        test: &TestCase,
    ) -> Result<StaticElements, AnalyzerError>;

    fn dynamic_analysis(
        &self,
        inputs: &Inputs<'_>,
        trace: &DynamicTrace,
        prior: &DynamicResults,
        elements: &StaticElements,
        test: &TestCase,
    ) -> Result<DynamicFacts, AnalyzerError>;

    /// Pure function of its arguments.
    fn label_test(
        &self,
        inputs: &Inputs<'_>,
        elements: &StaticElements,
        facts: &DynamicFacts,
        test: &TestCase,
    ) -> Vec<Label>;

    /// An empty vector means no proposal.
    fn apply_refactor(
        &self,
        inputs: &Inputs<'_>,
        elements: &StaticElements,
        facts: &DynamicFacts,
        labels: &[Label],
        test: &TestCase,
    ) -> Result<Vec<RefactoringProposal>, AnalyzerError>;
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown analyzer `{0}`")]
pub struct UnknownAnalyzer(pub String);

/// Analyzers by name, in execution order.
pub struct AnalyzerRegistry {
    analyzers: Vec<Box<dyn TestAnalyzer>>,
}

impl AnalyzerRegistry {
    pub fn empty() -> Self {
        Self { analyzers: Vec::new() }
    }

    /// The built-in analyzers in their fixed order: missed-fail, smoke,
    /// both-branches, assertion-rotten, helper-call-rotten,
    /// assertion-in-helper, skip.
    pub fn builtin() -> Self {
        let mut r = Self::empty();
        r.register(Box::new(MissedFailAnalyzer));
        r.register(Box::new(SmokeAnalyzer));
        r.register(Box::new(BothBranchesAnalyzer));
        r.register(Box::new(AssertionRottenAnalyzer));
        r.register(Box::new(HelperCallRottenAnalyzer));
        r.register(Box::new(AssertionInHelperAnalyzer));
        r.register(Box::new(SkipAnalyzer));
        r
    }

    /// Appends an analyzer; it runs after every analyzer already present.
    pub fn register(&mut self, analyzer: Box<dyn TestAnalyzer>) {
        self.analyzers.push(analyzer);
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.analyzers.iter().map(|a| a.name()).collect()
    }

    /// Keeps only the named analyzers, preserving registry order.
    pub fn select<S: AsRef<str>>(self, names: &[S]) -> Result<Self, UnknownAnalyzer> {
        for n in names {
            if !self.analyzers.iter().any(|a| a.name() == n.as_ref()) {
                return Err(UnknownAnalyzer(n.as_ref().to_string()));
            }
        }
        let analyzers = self.analyzers.into_iter().filter(|a| names.iter().any(|n| n.as_ref() == a.name())).collect();
        Ok(Self { analyzers })
    }

    pub fn analyzers(&self) -> &[Box<dyn TestAnalyzer>] {
        &self.analyzers
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Diagnostic {
    pub test: String,
    pub analyzer: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct PipelineOutput {
    pub labels: Vec<Label>,
    pub refactors: Vec<RefactoringProposal>,
    pub diagnostics: Vec<Diagnostic>,
}

/// Runs every analyzer on every passing test, in test order then analyzer
/// order. An analyzer error on one test is recorded as a diagnostic and the
/// run continues.
pub fn run_pipeline(
    inputs: &Inputs<'_>,
    tests: &[TestCase],
    trace: &DynamicTrace,
    registry: &AnalyzerRegistry,
) -> PipelineOutput {
    let mut out = PipelineOutput::default();
    for test in tests {
        if trace.status(&test.name) != Some(TestStatus::Pass) {
            continue;
        }
        let mut stat_results = StaticResults::new();
        let mut dyn_results = DynamicResults::new();
        for analyzer in registry.analyzers() {
            let name = analyzer.name();
            let step = analyzer.find_elements(inputs, &stat_results, test).and_then(|elements| {
                let facts = analyzer.dynamic_analysis(inputs, trace, &dyn_results, &elements, test)?;
                Ok((elements, facts))
            });
            let (elements, facts) = match step {
                Ok(v) => v,
                Err(e) => {
                    out.diagnostics.push(Diagnostic { test: test.name.clone(), analyzer: name, message: e.to_string() });
                    continue;
                }
            };
            let labels = analyzer.label_test(inputs, &elements, &facts, test);
            match analyzer.apply_refactor(inputs, &elements, &facts, &labels, test) {
                Ok(proposals) => out.refactors.extend(proposals),
                Err(e) => out.diagnostics.push(Diagnostic { test: test.name.clone(), analyzer: name, message: e.to_string() }),
            }
            out.labels.extend(labels);
            stat_results.insert(name, elements);
            dyn_results.insert(name, facts);
        }
    }
    out
}
