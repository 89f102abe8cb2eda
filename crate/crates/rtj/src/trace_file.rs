//! Per-test trace files.
//!
//! ```text
//! #rtj-trace v1 test:rotten::skip_guard
//! 12	1
//! 40	3
//! ```
//!
//! One header line, then `element_id<TAB>count` records sorted by id. The
//! injected runtime writes the same format, one part file per crate linked
//! into the test process.

// The format example above uses real tab separators.
#![allow(clippy::tabs_in_doc_comments)]

use std::collections::BTreeMap;

use rtj_core::ElementId;

pub const HEADER: &str = "#rtj-trace v1";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TraceFileError {
    #[error("missing or malformed header")]
    Header,
    #[error("line {0}: malformed record")]
    Record(usize),
    #[error("line {line}: element {id} is not part of the model")]
    UnknownElement { line: usize, id: u32 },
    #[error("trace belongs to `{found}`, expected `{expected}`")]
    WrongTest { expected: String, found: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TraceRecord {
    pub test: String,
    pub hits: BTreeMap<ElementId, u64>,
}

impl TraceRecord {
    pub fn render(&self) -> String {
        let mut out = format!("{HEADER} {}\n", self.test);
        for (id, n) in self.hits.iter().filter(|(_, n)| **n > 0) {
            out.push_str(&format!("{id}\t{n}\n"));
        }
        out
    }

    /// Adds the counts of a part file for the same test.
    pub fn merge(&mut self, other: TraceRecord) -> Result<(), TraceFileError> {
        if other.test != self.test {
            return Err(TraceFileError::WrongTest { expected: self.test.clone(), found: other.test });
        }
        for (id, n) in other.hits {
            *self.hits.entry(id).or_default() += n;
        }
        Ok(())
    }
}

/// Parses a trace or part file; ids must be below `element_count`.
pub fn parse(text: &str, element_count: usize) -> Result<TraceRecord, TraceFileError> {
    let mut lines = text.lines();
    let header = lines.next().ok_or(TraceFileError::Header)?;
    let test = header.strip_prefix(HEADER).and_then(|r| r.strip_prefix(' ')).ok_or(TraceFileError::Header)?;
    let mut hits = BTreeMap::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        if line.is_empty() {
            continue;
        }
        let (id, count) = line.split_once('\t').ok_or(TraceFileError::Record(line_no))?;
        let id: u32 = id.parse().map_err(|_| TraceFileError::Record(line_no))?;
        let count: u64 = count.parse().map_err(|_| TraceFileError::Record(line_no))?;
        if id as usize >= element_count {
            return Err(TraceFileError::UnknownElement { line: line_no, id });
        }
        *hits.entry(ElementId(id)).or_default() += count;
    }
    Ok(TraceRecord { test: test.to_string(), hits })
}
