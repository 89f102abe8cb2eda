//! Refactoring proposals as byte-anchored text edits.
//!
//! Two refactorings exist: replacing a forced-fail assertion with the fail
//! primitive, and annotating a rotten element with a `TODO` comment line.
//! Every edit records the exact text it replaces so that application can
//! detect files that changed since the proposal was made.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::analysis::{Category, Label};
use crate::model::{ByteSpan, ElementId, ProgramModel, SourceLocation};
use crate::query::{classify_call, CallClass};
use crate::rules::Rules;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RefactorKind {
    ReplaceForcedFail,
    AddTodoComment,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct RefactorPolicy {
    pub todo_comments: bool,
    pub fix_missed_fail: bool,
}

impl RefactorPolicy {
    pub const NONE: Self = Self { todo_comments: false, fix_missed_fail: false };
    pub const ALL: Self = Self { todo_comments: true, fix_missed_fail: true };
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TextEdit {
    pub anchor: SourceLocation,
    pub span: ByteSpan,
    pub original_snippet: String,
    pub replacement_snippet: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RefactoringProposal {
    pub test: String,
    pub kind: RefactorKind,
    /// All in [`TextEdit::anchor`]'s file or spread over several files;
    /// ordered by file then position.
    pub edits: Vec<TextEdit>,
    pub rationale: Label,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RefactorError {
    #[error("label category {0} cannot be fixed by replacing a forced fail")]
    WrongCategory(Category),
    #[error("element {0} is not a forced-fail assertion")]
    NotForcedFail(ElementId),
    #[error("forced-fail assertion {0} is embedded in a larger expression")]
    UnsupportedShape(ElementId),
    #[error("label has no evidence element that resolves in the model")]
    UnresolvedAnchor,
    #[error("{file}:{line}: source no longer matches the proposal")]
    StaleAnchor { file: String, line: u32 },
    #[error("{file}: edits at lines {first} and {second} overlap")]
    ConflictingProposals { file: String, first: u32, second: u32 },
}

/// Replaces a forced-fail assertion call with an argument-free call to the
/// fail primitive, keeping the surrounding punctuation and indentation.
pub fn propose_replace_forced_fail(
    label: &Label,
    model: &ProgramModel,
    rules: &Rules,
) -> Result<RefactoringProposal, RefactorError> {
    if label.category != Category::MissedFail {
        return Err(RefactorError::WrongCategory(label.category));
    }
    let site = label.evidence.first().ok_or(RefactorError::UnresolvedAnchor)?;
    let node = model.node(site.element_id).ok_or(RefactorError::UnresolvedAnchor)?;
    let call = match classify_call(node, rules) {
        CallClass::Assertion(c) if rules.is_forced_fail(c) => c,
        _ => return Err(RefactorError::NotForcedFail(node.id)),
    };
    let info = node.call.as_ref().ok_or(RefactorError::NotForcedFail(node.id))?;
    if call.span != info.expr_span {
        return Err(RefactorError::UnsupportedShape(node.id));
    }
    let unit = model.unit_by_path(&node.location.file).ok_or(RefactorError::UnresolvedAnchor)?;
    let original = unit.text(call.span).ok_or(RefactorError::UnresolvedAnchor)?;
    Ok(RefactoringProposal {
        test: label.test.clone(),
        kind: RefactorKind::ReplaceForcedFail,
        edits: alloc::vec![TextEdit {
            anchor: node.location.clone(),
            span: call.span,
            original_snippet: original.into(),
            replacement_snippet: rules.fail_call(),
        }],
        rationale: label.clone(),
    })
}

fn explanation(category: Category) -> &'static str {
    match category {
        Category::ContextDependentAssertion => "assertion never runs because its branch is not taken",
        Category::ContextDependentHelperCall => "helper call never runs because its branch is not taken",
        Category::FullyRottenAssertion => "assertion never runs in this passing test",
        Category::FullyRottenHelperCall => "helper call never runs in this passing test",
        Category::RottenAssertionInHelper => "helper assertion never runs although the helper is called",
        Category::Skip => "this early return skips every assertion written below it",
        Category::MissedFail => "assertion is forced to fail; call the fail primitive instead",
        Category::Smoke => "test contains no assertion and no helper call",
        Category::BothBranchesContextDependent => "only one of the asserting branches runs here",
    }
}

/// Comment text inserted by [`propose_todo_comment`].
pub fn todo_text(label: &Label) -> String {
    format!("// TODO [rotten:{}] {}: {}", label.category, label.analyzer, explanation(label.category))
}

fn todo_targets(label: &Label) -> Vec<ElementId> {
    match label.category {
        Category::Skip => label.evidence.iter().take(1).map(|e| e.element_id).collect(),
        c if c.is_static() => label.evidence.iter().map(|e| e.element_id).collect(),
        _ => label.evidence.iter().filter(|e| e.hits == 0).map(|e| e.element_id).collect(),
    }
}

/// Inserts a `TODO` comment line above each rotten evidence element (the
/// return for a skip label), indented like the element's line.
pub fn propose_todo_comment(label: &Label, model: &ProgramModel) -> Result<RefactoringProposal, RefactorError> {
    let text = todo_text(label);
    let mut seen = BTreeSet::new();
    let mut edits = Vec::new();
    for id in todo_targets(label) {
        let Some(element) = model.element(id) else { continue };
        let loc = element.location();
        if !seen.insert((loc.file.clone(), loc.line)) {
            continue;
        }
        let Some(unit) = model.unit_by_path(&loc.file) else { continue };
        let Some(span) = unit.line_span(loc.line) else { continue };
        let Some(line) = unit.text(span) else { continue };
        let indent: String = line.chars().take_while(|c| c.is_whitespace()).collect();
        edits.push(TextEdit {
            anchor: loc.clone(),
            span,
            original_snippet: line.into(),
            replacement_snippet: format!("{indent}{text}\n{line}"),
        });
    }
    if edits.is_empty() {
        return Err(RefactorError::UnresolvedAnchor);
    }
    edits.sort_by(|a, b| (&a.anchor.file, a.span).cmp(&(&b.anchor.file, b.span)));
    Ok(RefactoringProposal { test: label.test.clone(), kind: RefactorKind::AddTodoComment, edits, rationale: label.clone() })
}

/// Applies edits to one file's text. Identical edits collapse into one;
/// edits are applied from the end of the file towards the start so earlier
/// offsets stay valid.
pub fn apply_edits(file: &str, source: &str, edits: &[&TextEdit]) -> Result<String, RefactorError> {
    let mut sorted: Vec<&TextEdit> = edits.to_vec();
    sorted.sort_by(|a, b| (a.span, &a.replacement_snippet).cmp(&(b.span, &b.replacement_snippet)));
    sorted.dedup_by(|a, b| a.span == b.span && a.replacement_snippet == b.replacement_snippet);
    for e in &sorted {
        if source.get(e.span.start..e.span.end) != Some(e.original_snippet.as_str()) {
            return Err(RefactorError::StaleAnchor { file: file.into(), line: e.anchor.line });
        }
    }
    for pair in sorted.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let overlaps = a.span.end > b.span.start || (a.span == b.span && a.span.start != a.span.end);
        if overlaps {
            return Err(RefactorError::ConflictingProposals { file: file.into(), first: a.anchor.line, second: b.anchor.line });
        }
    }
    let mut out = String::from(source);
    for e in sorted.iter().rev() {
        out.replace_range(e.span.start..e.span.end, &e.replacement_snippet);
    }
    Ok(out)
}
