use alloc::collections::BTreeSet;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use super::{
    AnalyzerError, BranchPair, Category, DynamicFacts, DynamicResults, Evidence, HelperBody, Inputs, Label,
    StaticElements, StaticResults, TestAnalyzer,
};
use crate::model::{ElementId, Method, NodeRole, SourceLocation, StmtKind};
use crate::query::{
    classify_call, find_assertions, find_guard_returns, find_helper_calls, under_conditional, AssertionCallSite,
    CallClass, GuardReturn, HelperCallSite, TestCase,
};
use crate::refactor::{propose_replace_forced_fail, propose_todo_comment, RefactoringProposal};
use crate::trace::DynamicTrace;

fn label(test: &str, category: Category, analyzer: &str, evidence: Vec<Evidence>) -> Label {
    Label { test: test.to_string(), category, evidence, analyzer: analyzer.to_string() }
}

fn todo_proposals(inputs: &Inputs<'_>, labels: &[Label]) -> Result<Vec<RefactoringProposal>, AnalyzerError> {
    if !inputs.policy.todo_comments {
        return Ok(Vec::new());
    }
    labels.iter().map(|l| propose_todo_comment(l, inputs.model).map_err(AnalyzerError::from)).collect()
}

fn all_suppressed(prior: &DynamicResults) -> BTreeSet<ElementId> {
    prior.values().flat_map(|f| f.suppressed.iter().copied()).collect()
}

/// Unexecuted, non-forced assertion sites: context dependent when any
/// enclosing element is a conditional, fully rotten otherwise. Suppressed
/// sites and untraced sites are skipped.
pub fn classify_assertion_rotten(test: &str, assertions: &[AssertionCallSite], facts: &DynamicFacts) -> Vec<Label> {
    assertions
        .iter()
        .filter(|a| !a.is_forced_fail && !facts.suppressed.contains(&a.site.element_id))
        .filter(|a| facts.hits(a.site.element_id) == Some(0))
        .map(|a| {
            let category = if under_conditional(&a.context_chain) {
                Category::ContextDependentAssertion
            } else {
                Category::FullyRottenAssertion
            };
            label(test, category, AssertionRottenAnalyzer::NAME, vec![Evidence::new(&a.site, 0)])
        })
        .collect()
}

pub fn classify_helper_call_rotten(test: &str, helper_calls: &[HelperCallSite], facts: &DynamicFacts) -> Vec<Label> {
    helper_calls
        .iter()
        .filter(|c| !facts.suppressed.contains(&c.site.element_id))
        .filter(|c| facts.hits(c.site.element_id) == Some(0))
        .map(|c| {
            let category = if under_conditional(&c.context_chain) {
                Category::ContextDependentHelperCall
            } else {
                Category::FullyRottenHelperCall
            };
            label(test, category, HelperCallRottenAnalyzer::NAME, vec![Evidence::new(&c.site, 0)])
        })
        .collect()
}

/// One label per executed helper (reached directly or through executed
/// helper calls inside executed helpers) that leaves one of its own
/// assertions unexecuted.
pub fn classify_assertion_in_helper(
    test: &str,
    helper_calls: &[HelperCallSite],
    bodies: &[HelperBody],
    facts: &DynamicFacts,
) -> Vec<Label> {
    let executed = |c: &&HelperCallSite| facts.hits(c.site.element_id).is_some_and(|h| h > 0);
    let mut queue: Vec<&HelperCallSite> = helper_calls.iter().filter(executed).collect();
    queue.reverse();
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    while let Some(call) = queue.pop() {
        if !seen.insert(call.callee_ref) {
            continue;
        }
        let Some(body) = bodies.iter().find(|b| b.helper == call.callee_ref) else { continue };
        let unexecuted: Vec<Evidence> = body
            .assertions
            .iter()
            .filter(|a| facts.hits(a.site.element_id) == Some(0))
            .map(|a| Evidence::new(&a.site, 0))
            .collect();
        if !unexecuted.is_empty() {
            let call_hits = facts.hits(call.site.element_id).unwrap_or(0);
            let mut evidence = vec![Evidence::new(&call.site, call_hits)];
            evidence.extend(unexecuted);
            out.push(label(test, Category::RottenAssertionInHelper, AssertionInHelperAnalyzer::NAME, evidence));
        }
        let mut inner: Vec<&HelperCallSite> = body.helper_calls.iter().filter(executed).collect();
        inner.reverse();
        queue.extend(inner);
    }
    out
}

/// An executed return with assertion or helper-call sites below it, none of
/// which ran.
pub fn classify_skip(test: &str, guards: &[GuardReturn], facts: &DynamicFacts) -> Vec<Label> {
    guards
        .iter()
        .filter(|g| facts.hits(g.site.element_id).is_some_and(|h| h >= 1))
        .filter(|g| !g.below.is_empty() && g.below.iter().all(|s| facts.hits(s.element_id) == Some(0)))
        .map(|g| {
            let mut evidence = vec![Evidence::new(&g.site, facts.hits(g.site.element_id).unwrap_or(0))];
            evidence.extend(g.below.iter().map(|s| Evidence::new(s, 0)));
            label(test, Category::Skip, SkipAnalyzer::NAME, evidence)
        })
        .collect()
}

/// Every forced-fail assertion, executed or not.
pub fn classify_missed_fail(test: &str, assertions: &[AssertionCallSite], facts: &DynamicFacts) -> Vec<Label> {
    assertions
        .iter()
        .filter(|a| a.is_forced_fail)
        .map(|a| {
            let hits = facts.hits(a.site.element_id).unwrap_or(0);
            label(test, Category::MissedFail, MissedFailAnalyzer::NAME, vec![Evidence::new(&a.site, hits)])
        })
        .collect()
}

pub fn classify_smoke(
    test: &str,
    method: &Method,
    assertions: &[AssertionCallSite],
    helper_calls: &[HelperCallSite],
    facts: &DynamicFacts,
) -> Vec<Label> {
    if !assertions.is_empty() || !helper_calls.is_empty() {
        return Vec::new();
    }
    let hits = facts.hits(method.id).unwrap_or(0);
    vec![label(test, Category::Smoke, SmokeAnalyzer::NAME, vec![Evidence::new(&method.location, hits)])]
}

/// Conditionals asserting in both branches where exactly one branch ran.
/// Returns the labels and the sites of the branches that did not run, which
/// later analyzers must not report again.
pub fn detect_both_branches(test: &str, pairs: &[BranchPair], facts: &DynamicFacts) -> (Vec<Label>, BTreeSet<ElementId>) {
    let ran = |ids: &[ElementId]| ids.iter().any(|&id| facts.hits(id).is_some_and(|h| h > 0));
    let mut labels = Vec::new();
    let mut suppressed = BTreeSet::new();
    for pair in pairs {
        let (then_ran, else_ran) = (ran(&pair.then_elements), ran(&pair.else_elements));
        if then_ran == else_ran {
            continue;
        }
        let skipped = if then_ran { &pair.else_sites } else { &pair.then_sites };
        suppressed.extend(skipped.iter().map(|s| s.element_id));
        let evidence = pair
            .then_sites
            .iter()
            .chain(&pair.else_sites)
            .map(|s| Evidence::new(s, facts.hits(s.element_id).unwrap_or(0)))
            .collect();
        labels.push(label(test, Category::BothBranchesContextDependent, BothBranchesAnalyzer::NAME, evidence));
    }
    (labels, suppressed)
}

fn assertion_ids(a: &[AssertionCallSite]) -> impl Iterator<Item = ElementId> + '_ {
    a.iter().map(|s| s.site.element_id)
}

fn helper_call_ids(c: &[HelperCallSite]) -> impl Iterator<Item = ElementId> + '_ {
    c.iter().map(|s| s.site.element_id)
}

pub struct MissedFailAnalyzer;

impl MissedFailAnalyzer {
    pub const NAME: &'static str = "missed-fail";
}

impl TestAnalyzer for MissedFailAnalyzer {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn find_elements(&self, inputs: &Inputs<'_>, _: &StaticResults, test: &TestCase) -> Result<StaticElements, AnalyzerError> {
        let assertions = find_assertions(inputs.model, test.method_ref, inputs.rules)?;
        Ok(StaticElements { assertions, ..Default::default() })
    }

    fn dynamic_analysis(
        &self,
        _: &Inputs<'_>,
        trace: &DynamicTrace,
        _: &DynamicResults,
        elements: &StaticElements,
        test: &TestCase,
    ) -> Result<DynamicFacts, AnalyzerError> {
        Ok(DynamicFacts::collect(trace, test, assertion_ids(&elements.assertions)))
    }

    fn label_test(&self, _: &Inputs<'_>, elements: &StaticElements, facts: &DynamicFacts, test: &TestCase) -> Vec<Label> {
        classify_missed_fail(&test.name, &elements.assertions, facts)
    }

    fn apply_refactor(
        &self,
        inputs: &Inputs<'_>,
        _: &StaticElements,
        _: &DynamicFacts,
        labels: &[Label],
        _: &TestCase,
    ) -> Result<Vec<RefactoringProposal>, AnalyzerError> {
        if inputs.policy.fix_missed_fail {
            return labels
                .iter()
                .map(|l| propose_replace_forced_fail(l, inputs.model, inputs.rules).map_err(AnalyzerError::from))
                .collect();
        }
        todo_proposals(inputs, labels)
    }
}

pub struct SmokeAnalyzer;

impl SmokeAnalyzer {
    pub const NAME: &'static str = "smoke";
}

impl TestAnalyzer for SmokeAnalyzer {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn find_elements(&self, inputs: &Inputs<'_>, _: &StaticResults, test: &TestCase) -> Result<StaticElements, AnalyzerError> {
        Ok(StaticElements {
            assertions: find_assertions(inputs.model, test.method_ref, inputs.rules)?,
            helper_calls: find_helper_calls(inputs.model, test.method_ref, inputs.rules, inputs.helpers)?,
            ..Default::default()
        })
    }

    fn dynamic_analysis(
        &self,
        _: &Inputs<'_>,
        trace: &DynamicTrace,
        _: &DynamicResults,
        _: &StaticElements,
        test: &TestCase,
    ) -> Result<DynamicFacts, AnalyzerError> {
        Ok(DynamicFacts::collect(trace, test, [test.method_ref]))
    }

    fn label_test(&self, inputs: &Inputs<'_>, elements: &StaticElements, facts: &DynamicFacts, test: &TestCase) -> Vec<Label> {
        match inputs.model.method(test.method_ref) {
            Some(m) => classify_smoke(&test.name, m, &elements.assertions, &elements.helper_calls, facts),
            None => Vec::new(),
        }
    }

    fn apply_refactor(
        &self,
        _: &Inputs<'_>,
        _: &StaticElements,
        _: &DynamicFacts,
        _: &[Label],
        _: &TestCase,
    ) -> Result<Vec<RefactoringProposal>, AnalyzerError> {
        Ok(Vec::new())
    }
}

pub struct BothBranchesAnalyzer;

impl BothBranchesAnalyzer {
    pub const NAME: &'static str = "both-branches";
}

impl TestAnalyzer for BothBranchesAnalyzer {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn find_elements(&self, inputs: &Inputs<'_>, _: &StaticResults, test: &TestCase) -> Result<StaticElements, AnalyzerError> {
        let model = inputs.model;
        let method = model.method(test.method_ref).ok_or(crate::query::QueryError::UnknownElement(test.method_ref))?;
        let is_site = |id: ElementId| {
            model.node(id).is_some_and(|n| match classify_call(n, inputs.rules) {
                CallClass::Assertion(_) => true,
                CallClass::Project(_, target) => inputs.helpers.contains_key(&target),
                CallClass::Other => false,
            })
        };
        let branch = |id: ElementId| -> (Vec<ElementId>, Vec<SourceLocation>) {
            let nodes = model.subtree(id);
            let sites = nodes.iter().filter(|n| is_site(n.id)).map(|n| n.location.clone()).collect();
            (nodes.iter().map(|n| n.id).collect(), sites)
        };
        let mut pairs = Vec::new();
        for node in method.nodes.iter().filter_map(|&id| model.node(id)) {
            if node.kind != StmtKind::Conditional {
                continue;
            }
            let child = |role| node.children.iter().copied().find(|&c| model.node(c).is_some_and(|n| n.role == role));
            let (Some(then_id), Some(else_id)) = (child(NodeRole::Then), child(NodeRole::Else)) else { continue };
            let (then_elements, then_sites) = branch(then_id);
            let (else_elements, else_sites) = branch(else_id);
            if !then_sites.is_empty() && !else_sites.is_empty() {
                pairs.push(BranchPair { conditional: node.id, then_elements, else_elements, then_sites, else_sites });
            }
        }
        Ok(StaticElements { branch_pairs: pairs, ..Default::default() })
    }

    fn dynamic_analysis(
        &self,
        _: &Inputs<'_>,
        trace: &DynamicTrace,
        _: &DynamicResults,
        elements: &StaticElements,
        test: &TestCase,
    ) -> Result<DynamicFacts, AnalyzerError> {
        let ids = elements.branch_pairs.iter().flat_map(|p| p.then_elements.iter().chain(&p.else_elements).copied());
        let mut facts = DynamicFacts::collect(trace, test, ids);
        facts.suppressed = detect_both_branches(&test.name, &elements.branch_pairs, &facts).1;
        Ok(facts)
    }

    fn label_test(&self, _: &Inputs<'_>, elements: &StaticElements, facts: &DynamicFacts, test: &TestCase) -> Vec<Label> {
        detect_both_branches(&test.name, &elements.branch_pairs, facts).0
    }

    fn apply_refactor(
        &self,
        _: &Inputs<'_>,
        _: &StaticElements,
        _: &DynamicFacts,
        _: &[Label],
        _: &TestCase,
    ) -> Result<Vec<RefactoringProposal>, AnalyzerError> {
        Ok(Vec::new())
    }
}

pub struct AssertionRottenAnalyzer;

impl AssertionRottenAnalyzer {
    pub const NAME: &'static str = "assertion-rotten";
}

impl TestAnalyzer for AssertionRottenAnalyzer {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn find_elements(&self, inputs: &Inputs<'_>, _: &StaticResults, test: &TestCase) -> Result<StaticElements, AnalyzerError> {
        let assertions = find_assertions(inputs.model, test.method_ref, inputs.rules)?;
        Ok(StaticElements { assertions, ..Default::default() })
    }

    fn dynamic_analysis(
        &self,
        _: &Inputs<'_>,
        trace: &DynamicTrace,
        prior: &DynamicResults,
        elements: &StaticElements,
        test: &TestCase,
    ) -> Result<DynamicFacts, AnalyzerError> {
        let mut facts = DynamicFacts::collect(trace, test, assertion_ids(&elements.assertions));
        facts.suppressed = all_suppressed(prior);
        Ok(facts)
    }

    fn label_test(&self, _: &Inputs<'_>, elements: &StaticElements, facts: &DynamicFacts, test: &TestCase) -> Vec<Label> {
        classify_assertion_rotten(&test.name, &elements.assertions, facts)
    }

    fn apply_refactor(
        &self,
        inputs: &Inputs<'_>,
        _: &StaticElements,
        _: &DynamicFacts,
        labels: &[Label],
        _: &TestCase,
    ) -> Result<Vec<RefactoringProposal>, AnalyzerError> {
        todo_proposals(inputs, labels)
    }
}

pub struct HelperCallRottenAnalyzer;

impl HelperCallRottenAnalyzer {
    pub const NAME: &'static str = "helper-call-rotten";
}

impl TestAnalyzer for HelperCallRottenAnalyzer {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn find_elements(&self, inputs: &Inputs<'_>, _: &StaticResults, test: &TestCase) -> Result<StaticElements, AnalyzerError> {
        let helper_calls = find_helper_calls(inputs.model, test.method_ref, inputs.rules, inputs.helpers)?;
        Ok(StaticElements { helper_calls, ..Default::default() })
    }

    fn dynamic_analysis(
        &self,
        _: &Inputs<'_>,
        trace: &DynamicTrace,
        prior: &DynamicResults,
        elements: &StaticElements,
        test: &TestCase,
    ) -> Result<DynamicFacts, AnalyzerError> {
        let mut facts = DynamicFacts::collect(trace, test, helper_call_ids(&elements.helper_calls));
        facts.suppressed = all_suppressed(prior);
        Ok(facts)
    }

    fn label_test(&self, _: &Inputs<'_>, elements: &StaticElements, facts: &DynamicFacts, test: &TestCase) -> Vec<Label> {
        classify_helper_call_rotten(&test.name, &elements.helper_calls, facts)
    }

    fn apply_refactor(
        &self,
        inputs: &Inputs<'_>,
        _: &StaticElements,
        _: &DynamicFacts,
        labels: &[Label],
        _: &TestCase,
    ) -> Result<Vec<RefactoringProposal>, AnalyzerError> {
        todo_proposals(inputs, labels)
    }
}

pub struct AssertionInHelperAnalyzer;

impl AssertionInHelperAnalyzer {
    pub const NAME: &'static str = "assertion-in-helper";
}

impl TestAnalyzer for AssertionInHelperAnalyzer {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn find_elements(&self, inputs: &Inputs<'_>, _: &StaticResults, test: &TestCase) -> Result<StaticElements, AnalyzerError> {
        let (model, rules, helpers) = (inputs.model, inputs.rules, inputs.helpers);
        let helper_calls = find_helper_calls(model, test.method_ref, rules, helpers)?;
        let mut pending: Vec<ElementId> = helper_calls.iter().map(|c| c.callee_ref).collect();
        let mut seen = BTreeSet::new();
        let mut helper_bodies = Vec::new();
        while let Some(h) = pending.pop() {
            if !seen.insert(h) {
                continue;
            }
            let body = HelperBody {
                helper: h,
                assertions: find_assertions(model, h, rules)?,
                helper_calls: find_helper_calls(model, h, rules, helpers)?,
            };
            pending.extend(body.helper_calls.iter().map(|c| c.callee_ref));
            helper_bodies.push(body);
        }
        helper_bodies.sort_by_key(|b| b.helper);
        Ok(StaticElements { helper_calls, helper_bodies, ..Default::default() })
    }

    fn dynamic_analysis(
        &self,
        _: &Inputs<'_>,
        trace: &DynamicTrace,
        _: &DynamicResults,
        elements: &StaticElements,
        test: &TestCase,
    ) -> Result<DynamicFacts, AnalyzerError> {
        let ids = helper_call_ids(&elements.helper_calls).chain(
            elements
                .helper_bodies
                .iter()
                .flat_map(|b| assertion_ids(&b.assertions).chain(helper_call_ids(&b.helper_calls))),
        );
        Ok(DynamicFacts::collect(trace, test, ids))
    }

    fn label_test(&self, _: &Inputs<'_>, elements: &StaticElements, facts: &DynamicFacts, test: &TestCase) -> Vec<Label> {
        classify_assertion_in_helper(&test.name, &elements.helper_calls, &elements.helper_bodies, facts)
    }

    fn apply_refactor(
        &self,
        inputs: &Inputs<'_>,
        _: &StaticElements,
        _: &DynamicFacts,
        labels: &[Label],
        _: &TestCase,
    ) -> Result<Vec<RefactoringProposal>, AnalyzerError> {
        todo_proposals(inputs, labels)
    }
}

pub struct SkipAnalyzer;

impl SkipAnalyzer {
    pub const NAME: &'static str = "skip";
}

impl TestAnalyzer for SkipAnalyzer {
    fn name(&self) -> &'static str {
        Self::NAME
    }

    fn find_elements(&self, inputs: &Inputs<'_>, _: &StaticResults, test: &TestCase) -> Result<StaticElements, AnalyzerError> {
        let guards = find_guard_returns(inputs.model, test.method_ref, inputs.rules, inputs.helpers)?;
        Ok(StaticElements { guards, ..Default::default() })
    }

    fn dynamic_analysis(
        &self,
        _: &Inputs<'_>,
        trace: &DynamicTrace,
        _: &DynamicResults,
        elements: &StaticElements,
        test: &TestCase,
    ) -> Result<DynamicFacts, AnalyzerError> {
        let ids = elements.guards.iter().flat_map(|g| core::iter::once(&g.site).chain(&g.below)).map(|s| s.element_id);
        Ok(DynamicFacts::collect(trace, test, ids))
    }

    fn label_test(&self, _: &Inputs<'_>, elements: &StaticElements, facts: &DynamicFacts, test: &TestCase) -> Vec<Label> {
        classify_skip(&test.name, &elements.guards, facts)
    }

    fn apply_refactor(
        &self,
        inputs: &Inputs<'_>,
        _: &StaticElements,
        _: &DynamicFacts,
        labels: &[Label],
        _: &TestCase,
    ) -> Result<Vec<RefactoringProposal>, AnalyzerError> {
        todo_proposals(inputs, labels)
    }
}
