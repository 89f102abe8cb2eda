//! JSON report file and the human summary.

use std::path::Path;

use rtj_core::report::Report;

/// Pretty JSON with a trailing newline. Field order follows the struct
/// definitions and every array is already sorted, so equal reports render
/// to equal bytes.
pub fn render_json(report: &Report) -> String {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    text
}

pub fn parse_report(text: &str) -> serde_json::Result<Report> {
    serde_json::from_str(text)
}

pub fn emit_report(report: &Report, path: &Path) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, render_json(report))
}

/// One line per label, then a totals line.
pub fn human_summary(report: &Report) -> String {
    let mut out = String::new();
    for t in &report.tests {
        for l in &t.labels {
            let at = l.evidence.first().map_or_else(|| format!("{}:{}", t.file, t.line), |e| format!("{}:{}", e.file, e.line));
            out.push_str(&format!("{at}: {} {} ({})\n", t.name, l.category, l.analyzer));
        }
    }
    let s = &report.summary;
    let special: u64 = s.special_cases.values().sum();
    out.push_str(&format!(
        "{} tests, {} analyzed, {} rotten, {} special case{}\n",
        report.tests.len(),
        s.analyzed_tests,
        s.rotten_tests,
        special,
        if special == 1 { "" } else { "s" }
    ));
    out
}
