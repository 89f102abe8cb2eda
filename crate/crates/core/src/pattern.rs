//! Name patterns with `*` wildcards, used for test markers, assertion names
//! and test-name filters.

use alloc::string::String;
use core::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NamePattern(String);

impl NamePattern {
    pub fn new(pattern: impl Into<String>) -> Self {
        Self(pattern.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Whole-string match where `*` matches any (possibly empty) run of
    /// characters and every other character matches itself.
    pub fn matches(&self, text: &str) -> bool {
        let pat = self.0.as_bytes();
        let txt = text.as_bytes();
        let (mut p, mut t) = (0, 0);
        // Position of the last `*` seen and the text index it was tried at.
        let mut star: Option<(usize, usize)> = None;
        while t < txt.len() {
            if p < pat.len() && pat[p] == b'*' {
                star = Some((p, t));
                p += 1;
            } else if p < pat.len() && pat[p] == txt[t] {
                p += 1;
                t += 1;
            } else if let Some((sp, st)) = star {
                p = sp + 1;
                t = st + 1;
                star = Some((sp, st + 1));
            } else {
                return false;
            }
        }
        pat[p..].iter().all(|&c| c == b'*')
    }
}

impl fmt::Display for NamePattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NamePattern {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}
