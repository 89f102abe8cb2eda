//! Turns refactoring proposals into file contents, diffs and writes.

use std::collections::BTreeMap;
use std::path::Path;

use rtj_core::refactor::{apply_edits, RefactorError, RefactoringProposal, TextEdit};

/// Old and new text of every file the accepted proposals touch.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Plan {
    pub files: BTreeMap<String, (String, String)>,
    /// Indices into the input proposals that were accepted.
    pub accepted: Vec<usize>,
    /// Proposals left out, with the reason.
    pub skipped: Vec<(usize, RefactorError)>,
}

/// Accepts proposals in order; one that conflicts with an already accepted
/// proposal or no longer matches the source is skipped.
pub fn plan(root: &Path, proposals: &[RefactoringProposal]) -> std::io::Result<Plan> {
    let mut sources: BTreeMap<String, String> = BTreeMap::new();
    let mut accepted_edits: BTreeMap<String, Vec<&TextEdit>> = BTreeMap::new();
    let mut out = Plan::default();
    'proposals: for (i, p) in proposals.iter().enumerate() {
        let mut trial = accepted_edits.clone();
        for e in &p.edits {
            trial.entry(e.anchor.file.clone()).or_default().push(e);
        }
        let mut results = BTreeMap::new();
        for file in p.edits.iter().map(|e| &e.anchor.file) {
            if results.contains_key(file) {
                continue;
            }
            if !sources.contains_key(file) {
                sources.insert(file.clone(), std::fs::read_to_string(root.join(file))?);
            }
            match apply_edits(file, &sources[file], &trial[file]) {
                Ok(text) => {
                    results.insert(file.clone(), text);
                }
                Err(e) => {
                    out.skipped.push((i, e));
                    continue 'proposals;
                }
            }
        }
        accepted_edits = trial;
        out.accepted.push(i);
        for (file, text) in results {
            out.files.insert(file.clone(), (sources[&file].clone(), text));
        }
    }
    Ok(out)
}

/// Unified diff of the plan, files in path order.
pub fn unified_diff(plan: &Plan) -> String {
    let mut out = String::new();
    for (file, (old, new)) in &plan.files {
        let diff = similar::TextDiff::from_lines(old, new);
        out.push_str(&diff.unified_diff().context_radius(3).header(&format!("a/{file}"), &format!("b/{file}")).to_string());
    }
    out
}

/// Writes every planned file in place through a temporary sibling.
pub fn write(root: &Path, plan: &Plan) -> std::io::Result<()> {
    for (file, (_, new)) in &plan.files {
        let path = root.join(file);
        let dir = path.parent().unwrap_or(root);
        let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
        std::io::Write::write_all(&mut tmp, new.as_bytes())?;
        tmp.persist(&path).map_err(|e| e.error)?;
    }
    Ok(())
}
