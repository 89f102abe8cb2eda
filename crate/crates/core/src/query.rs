//! Static identification of test elements over a [`ProgramModel`].

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{CallRef, ElementId, Method, Node, NodeRole, ProgramModel, SourceLocation, StmtKind, TargetKind};
use crate::rules::Rules;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum QueryError {
    #[error("element {0} is not a method of the model")]
    UnknownElement(ElementId),
}

/// Helper method id to its depth: 0 for a direct assertion, `n` when the
/// nearest assertion is `n` calls away.
pub type HelperMap = BTreeMap<ElementId, u32>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestCase {
    pub method_ref: ElementId,
    /// `<target>::<libtest path>`, e.g. `test:rotten::skip_guard`.
    pub name: String,
    /// Path understood by the test harness filter.
    pub harness_path: String,
    pub target: TargetKind,
    pub unit: String,
    pub line: u32,
    pub marker: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextEntry {
    pub id: ElementId,
    pub kind: StmtKind,
    pub role: NodeRole,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssertionCallSite {
    pub site: SourceLocation,
    pub callee_name: String,
    pub is_forced_fail: bool,
    /// Enclosing conditionals, loops and blocks, outermost first.
    pub context_chain: Vec<ContextEntry>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HelperCallSite {
    pub site: SourceLocation,
    pub callee_ref: ElementId,
    pub callee_name: String,
    /// Depth of the callee in the helper relation.
    pub transitive_depth: u32,
    pub context_chain: Vec<ContextEntry>,
}

/// Whether any enclosing element is a conditional.
pub fn under_conditional(chain: &[ContextEntry]) -> bool {
    chain.iter().any(|c| c.kind == StmtKind::Conditional)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GuardReturn {
    pub site: SourceLocation,
    /// Assertion and helper-call sites textually after the return.
    pub below: Vec<SourceLocation>,
}

/// What a call statement invokes, judged by its first significant callee.
#[derive(Debug, Clone, Copy)]
pub enum CallClass<'a> {
    Assertion(&'a CallRef),
    Project(&'a CallRef, ElementId),
    Other,
}

/// Walks the spine outermost first; the first callee that is either an
/// assertion primitive or a project-local method decides.
pub fn classify_call<'a>(node: &'a Node, rules: &Rules) -> CallClass<'a> {
    let Some(call) = &node.call else { return CallClass::Other };
    for c in &call.spine {
        if rules.is_assertion(&c.name) {
            return CallClass::Assertion(c);
        }
        if let Some(target) = c.resolved {
            return CallClass::Project(c, target);
        }
    }
    CallClass::Other
}

pub fn is_test_method(method: &Method, rules: &Rules) -> bool {
    rules.test_marker(&method.markers).is_some()
}

fn method(model: &ProgramModel, id: ElementId) -> Result<&Method, QueryError> {
    model.method(id).ok_or(QueryError::UnknownElement(id))
}

fn body<'a>(model: &'a ProgramModel, m: &'a Method) -> impl Iterator<Item = &'a Node> + 'a {
    m.nodes.iter().filter_map(move |&id| model.node(id))
}

pub fn context_chain(model: &ProgramModel, id: ElementId) -> Vec<ContextEntry> {
    let mut chain: Vec<ContextEntry> = model
        .ancestors(id)
        .filter(|n| matches!(n.kind, StmtKind::Conditional | StmtKind::Loop | StmtKind::Block))
        .map(|n| ContextEntry { id: n.id, kind: n.kind, role: n.role })
        .collect();
    chain.reverse();
    chain
}

/// Test-marked, non-nested methods, one case per compilation target the
/// method's unit belongs to, ordered by (file, line, name).
pub fn find_test_cases(model: &ProgramModel, rules: &Rules) -> Vec<TestCase> {
    let mut out = Vec::new();
    for m in model.methods().iter().filter(|m| !m.nested) {
        let Some(marker) = rules.test_marker(&m.markers) else { continue };
        let unit = model.unit_of(m);
        for membership in &unit.memberships {
            let mut segments: Vec<&str> = membership.module_path.iter().map(String::as_str).collect();
            segments.extend(m.path.iter().map(String::as_str));
            segments.push(&m.name);
            let harness_path = segments.join("::");
            out.push(TestCase {
                method_ref: m.id,
                name: alloc::format!("{}::{}", membership.target, harness_path),
                harness_path,
                target: membership.target.clone(),
                unit: unit.path.clone(),
                line: m.location.line,
                marker: marker.to_string(),
            });
        }
    }
    out.sort_by(|a, b| (&a.unit, a.line, &a.name).cmp(&(&b.unit, b.line, &b.name)));
    out
}

pub fn find_assertions(model: &ProgramModel, id: ElementId, rules: &Rules) -> Result<Vec<AssertionCallSite>, QueryError> {
    let m = method(model, id)?;
    Ok(body(model, m)
        .filter_map(|n| match classify_call(n, rules) {
            CallClass::Assertion(c) => Some(AssertionCallSite {
                site: n.location.clone(),
                callee_name: c.name.clone(),
                is_forced_fail: rules.is_forced_fail(c),
                context_chain: context_chain(model, n.id),
            }),
            _ => None,
        })
        .collect())
}

/// Least fixpoint of the helper relation. Test methods are never helpers.
pub fn detect_helpers(model: &ProgramModel, rules: &Rules) -> HelperMap {
    let candidates: Vec<&Method> = model.methods().iter().filter(|m| !is_test_method(m, rules)).collect();
    let mut helpers = HelperMap::new();
    let mut callees: BTreeMap<ElementId, BTreeSet<ElementId>> = BTreeMap::new();
    for m in &candidates {
        let mut direct = false;
        let mut calls = BTreeSet::new();
        for n in body(model, m) {
            match classify_call(n, rules) {
                CallClass::Assertion(_) => direct = true,
                CallClass::Project(_, target) => {
                    calls.insert(target);
                }
                CallClass::Other => {}
            }
        }
        if direct {
            helpers.insert(m.id, 0);
        }
        callees.insert(m.id, calls);
    }
    // Breadth-first by depth: level n+1 is every remaining candidate that
    // calls a level-n helper.
    let mut frontier: BTreeSet<ElementId> = helpers.keys().copied().collect();
    let mut depth = 0;
    while !frontier.is_empty() {
        depth += 1;
        let next: BTreeSet<ElementId> = callees
            .iter()
            .filter(|(id, calls)| !helpers.contains_key(id) && calls.iter().any(|c| frontier.contains(c)))
            .map(|(id, _)| *id)
            .collect();
        for id in &next {
            helpers.insert(*id, depth);
        }
        frontier = next;
    }
    helpers
}

pub fn find_helper_calls(
    model: &ProgramModel,
    id: ElementId,
    rules: &Rules,
    helpers: &HelperMap,
) -> Result<Vec<HelperCallSite>, QueryError> {
    let m = method(model, id)?;
    Ok(body(model, m)
        .filter_map(|n| match classify_call(n, rules) {
            CallClass::Project(c, target) => helpers.get(&target).map(|&depth| HelperCallSite {
                site: n.location.clone(),
                callee_ref: target,
                callee_name: c.name.clone(),
                transitive_depth: depth,
                context_chain: context_chain(model, n.id),
            }),
            _ => None,
        })
        .collect())
}

/// Early exits of the method itself (returns inside closures exit the
/// closure, not the method), each paired with the assertion and helper-call
/// sites whose textual order is after it.
pub fn find_guard_returns(
    model: &ProgramModel,
    id: ElementId,
    rules: &Rules,
    helpers: &HelperMap,
) -> Result<Vec<GuardReturn>, QueryError> {
    let m = method(model, id)?;
    let sites: Vec<&Node> = body(model, m)
        .filter(|n| match classify_call(n, rules) {
            CallClass::Assertion(_) => true,
            CallClass::Project(_, target) => helpers.contains_key(&target),
            CallClass::Other => false,
        })
        .collect();
    Ok(body(model, m)
        .filter(|n| n.kind == StmtKind::Return && !model.in_closure(n.id))
        .map(|r| GuardReturn {
            site: r.location.clone(),
            below: sites.iter().filter(|s| s.order > r.order).map(|s| s.location.clone()).collect(),
        })
        .collect())
}
