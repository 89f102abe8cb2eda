//! Source-to-source probe injection on a copy of the package.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rtj_core::model::{Element, Probe, TargetKind};
use rtj_core::{ElementId, ProgramModel};

pub const INSTRUMENTATION_VERSION: &str = "1";
pub const RUNTIME_MODULE: &str = "__rtj_rt";
pub const TRACE_DIR_VAR: &str = "RTJ_TRACE_DIR";
pub const TEST_NAME_VAR: &str = "RTJ_TEST_NAME";

/// Rewritten file contents by relative path, and the elements that carry a
/// probe.
#[derive(Debug, Clone, Default)]
pub struct Instrumented {
    pub files: BTreeMap<String, String>,
    pub traced: BTreeSet<ElementId>,
    pub warnings: Vec<String>,
}

fn probe_call(id: ElementId) -> String {
    format!("crate::{RUNTIME_MODULE}::hit({id});")
}

/// Part-file name of one compilation target.
pub fn runtime_tag(target: &TargetKind) -> String {
    target.to_string().chars().map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '-' }).collect()
}

fn runtime_module(len: usize, tag: &str) -> String {
    let len = len.max(1);
    format!(
        r##"

#[doc(hidden)]
#[allow(warnings, unsafe_code, clippy::all)]
pub(crate) mod {RUNTIME_MODULE} {{
    extern crate std;
    use self::std::sync::atomic::{{AtomicU64, Ordering}};

    const LEN: usize = {len};
    const TAG: &str = "{tag}";
    const ZERO: AtomicU64 = AtomicU64::new(0);
    static HITS: [AtomicU64; LEN] = [ZERO; LEN];
    static INIT: self::std::sync::Once = self::std::sync::Once::new();

    #[inline(never)]
    pub(crate) fn hit(id: usize) {{
        INIT.call_once(install);
        HITS[id].fetch_add(1, Ordering::Relaxed);
    }}

    fn install() {{
        unsafe extern "C" {{
            fn atexit(cb: extern "C" fn()) -> i32;
        }}
        extern "C" fn at_exit() {{
            flush();
        }}
        unsafe {{
            atexit(at_exit);
        }}
        let previous = self::std::panic::take_hook();
        self::std::panic::set_hook(self::std::boxed::Box::new(move |info| {{
            flush();
            previous(info);
        }}));
    }}

    pub(crate) fn flush() {{
        let Some(dir) = self::std::env::var_os("{TRACE_DIR_VAR}") else {{ return }};
        let test = self::std::env::var("{TEST_NAME_VAR}").unwrap_or_default();
        let mut out = self::std::format!("#rtj-trace v1 {{}}\n", test);
        for (i, h) in HITS.iter().enumerate() {{
            let n = h.load(Ordering::Relaxed);
            if n > 0 {{
                out.push_str(&self::std::format!("{{}}\t{{}}\n", i, n));
            }}
        }}
        let path = self::std::path::Path::new(&dir).join(self::std::format!("{{}}.part", TAG));
        let tmp = path.with_extension("tmp");
        if self::std::fs::write(&tmp, out.as_bytes()).is_ok() {{
            let _ = self::std::fs::rename(&tmp, &path);
        }}
    }}
}}
"##
    )
}

// Sort key for insertions at one offset: closing wraps (innermost first),
// block entries, statement probes, opening wraps (outermost first).
#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Insertion {
    offset: usize,
    rank: u8,
    tiebreak: i64,
    text: String,
}

fn insertions_for(id: ElementId, probe: Probe, source: &str) -> Result<Vec<Insertion>, String> {
    let ok = |o: usize| o <= source.len() && source.is_char_boundary(o);
    let key = i64::from(id.0);
    match probe {
        Probe::None => Ok(Vec::new()),
        Probe::Before(o) if ok(o) => {
            Ok(vec![Insertion { offset: o, rank: 2, tiebreak: key, text: format!("{} ", probe_call(id)) }])
        }
        Probe::BlockEntry(o) if ok(o) && source[o..].starts_with('{') => {
            Ok(vec![Insertion { offset: o + 1, rank: 1, tiebreak: key, text: format!(" {}", probe_call(id)) }])
        }
        Probe::Wrap(s) if ok(s.start) && ok(s.end) && s.start < s.end => Ok(vec![
            Insertion { offset: s.start, rank: 3, tiebreak: key, text: format!("{{ {} ", probe_call(id)) },
            Insertion { offset: s.end, rank: 0, tiebreak: -key, text: " }".into() },
        ]),
        other => Err(format!("probe {other:?} does not fit the source")),
    }
}

/// Rewrites every unit containing a target. Crate roots additionally get
/// the runtime module; `forbid(unsafe_code)` at crate level is relaxed to
/// `deny` so the module's `allow` can take effect. An empty target set
/// rewrites nothing.
pub fn instrument_sources(model: &ProgramModel, targets: &BTreeSet<ElementId>) -> Instrumented {
    let mut out = Instrumented::default();
    if targets.is_empty() {
        return out;
    }
    let mut per_unit: BTreeMap<&str, Vec<Insertion>> = BTreeMap::new();
    for &id in targets {
        let Some(element) = model.element(id) else {
            out.warnings.push(format!("element {id} is not in the model"));
            continue;
        };
        let file = match element {
            Element::Method(m) => model.unit_of(m).path.as_str(),
            Element::Node(n) => n.location.file.as_str(),
        };
        let Some(unit) = model.unit_by_path(file) else { continue };
        match insertions_for(id, element.probe(), &unit.source) {
            Ok(ins) if ins.is_empty() => {}
            Ok(ins) => {
                out.traced.insert(id);
                per_unit.entry(file).or_default().extend(ins);
            }
            Err(e) => {
                let loc = element.location();
                out.warnings.push(format!("{}:{}:{}: {e}; element {id} is not traced", loc.file, loc.line, loc.column));
            }
        }
    }
    for unit in model.units() {
        let root_tag = unit.memberships.iter().find(|m| m.is_root).map(|m| runtime_tag(&m.target));
        let ins = per_unit.remove(unit.path.as_str());
        if ins.is_none() && root_tag.is_none() {
            continue;
        }
        let mut ins = ins.unwrap_or_default();
        ins.sort();
        let mut text = String::with_capacity(unit.source.len() + ins.len() * 32);
        let mut pos = 0;
        for i in &ins {
            text.push_str(&unit.source[pos..i.offset]);
            text.push_str(&i.text);
            pos = i.offset;
        }
        text.push_str(&unit.source[pos..]);
        if let Some(tag) = root_tag {
            text = relax_forbid_unsafe(&text);
            text.push_str(&runtime_module(model.element_count(), &tag));
        }
        out.files.insert(unit.path.clone(), text);
    }
    out
}

fn relax_forbid_unsafe(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for line in text.split_inclusive('\n') {
        let trimmed = line.trim_start();
        if trimmed.starts_with("#![forbid(") && trimmed.contains("unsafe_code") {
            out.push_str(&line.replacen("#![forbid(", "#![deny(", 1));
        } else {
            out.push_str(line);
        }
    }
    out
}

/// Copies the package tree into `dest`, skipping `target/` and VCS
/// directories, then overwrites the rewritten files. Files whose content is
/// already identical are left untouched so incremental builds stay valid.
pub fn write_copy(root: &Path, dest: &Path, files: &BTreeMap<String, String>) -> std::io::Result<()> {
    std::fs::create_dir_all(dest)?;
    let dest_abs = dest.canonicalize()?;
    sync_dir(root, dest, &dest_abs, "", files)?;
    for (rel, text) in files {
        write_if_changed(&dest.join(rel), text.as_bytes())?;
    }
    Ok(())
}

fn write_if_changed(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    if std::fs::read(path).is_ok_and(|old| old == bytes) {
        return Ok(());
    }
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, bytes)
}

/// Directories holding `dest_abs` are skipped so a work dir inside the
/// project is never copied into itself.
fn sync_dir(src: &Path, dest: &Path, dest_abs: &Path, prefix: &str, skip: &BTreeMap<String, String>) -> std::io::Result<()> {
    std::fs::create_dir_all(dest)?;
    let mut entries: Vec<_> = std::fs::read_dir(src)?.collect::<Result<_, _>>()?;
    entries.sort_by_key(|e| e.file_name());
    for entry in entries {
        let name = entry.file_name();
        if name == ".git" || name == ".hg" || (prefix.is_empty() && name == "target") {
            continue;
        }
        let rel = format!("{prefix}{}", name.to_string_lossy());
        let ty = entry.file_type()?;
        let to = dest.join(&name);
        if ty.is_dir() {
            if dest_abs.starts_with(entry.path().canonicalize()?) {
                continue;
            }
            sync_dir(&entry.path(), &to, dest_abs, &format!("{rel}/"), skip)?;
        } else if skip.contains_key(&rel) {
            continue;
        } else if ty.is_file() || ty.is_symlink() {
            let bytes = std::fs::read(entry.path())?;
            write_if_changed(&to, &bytes)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::build_model;

    fn project(files: &[(&str, &str)]) -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        for (p, t) in files {
            let path = dir.path().join(p);
            std::fs::create_dir_all(path.parent().unwrap()).unwrap();
            std::fs::write(path, t).unwrap();
        }
        dir
    }

    const MANIFEST: &str = "[package]\nname = \"demo\"\nversion = \"0.1.0\"\nedition = \"2021\"\n";

    #[test]
    fn probes_land_at_statement_block_and_arm_positions() {
        let src = "#![forbid(unsafe_code)]\nfn f(x: Option<u8>) -> u8 {\n    let y = 1;\n    match x {\n        Some(v) => v,\n        None => { y }\n    }\n}\n";
        let dir = project(&[("Cargo.toml", MANIFEST), ("src/lib.rs", src)]);
        let p = build_model(dir.path()).unwrap();
        let all: BTreeSet<ElementId> = (0..p.model.element_count() as u32).map(ElementId).collect();
        let ins = instrument_sources(&p.model, &all);
        assert!(ins.warnings.is_empty(), "{:?}", ins.warnings);
        let text = &ins.files["src/lib.rs"];
        let body = text.split("\n\n#[doc(hidden)]").next().unwrap();
        assert_eq!(
            body,
            "#![deny(unsafe_code)]\nfn f(x: Option<u8>) -> u8 { crate::__rtj_rt::hit(0);\n    crate::__rtj_rt::hit(1); let y = 1;\n    crate::__rtj_rt::hit(2); match x {\n        Some(v) => { crate::__rtj_rt::hit(3); v },\n        None => { crate::__rtj_rt::hit(4); crate::__rtj_rt::hit(5); y }\n    }\n}\n"
        );
        assert!(text.contains("const LEN: usize = 6;"));
        assert!(text.contains("const TAG: &str = \"lib\";"));
    }

    #[test]
    fn nested_wraps_close_inside_out() {
        let src = "fn f(a: bool) -> u8 {\n    match a {\n        true => match a { _ => 1 },\n        false => 2,\n    }\n}\n";
        let dir = project(&[("Cargo.toml", MANIFEST), ("src/lib.rs", src)]);
        let p = build_model(dir.path()).unwrap();
        let all: BTreeSet<ElementId> = (0..p.model.element_count() as u32).map(ElementId).collect();
        let text = &instrument_sources(&p.model, &all).files["src/lib.rs"];
        assert!(text.contains(
            "true => { crate::__rtj_rt::hit(2); match a { _ => { crate::__rtj_rt::hit(3); 1 } } },"
        ), "{text}");
    }

    #[test]
    fn empty_target_set_changes_nothing() {
        let dir = project(&[("Cargo.toml", MANIFEST), ("src/lib.rs", "fn f() {}\n")]);
        let p = build_model(dir.path()).unwrap();
        let ins = instrument_sources(&p.model, &BTreeSet::new());
        assert!(ins.files.is_empty());
        let dest = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("target/debug")).unwrap();
        write_copy(dir.path(), dest.path(), &ins.files).unwrap();
        assert_eq!(std::fs::read_to_string(dest.path().join("src/lib.rs")).unwrap(), "fn f() {}\n");
        assert!(!dest.path().join("target").exists());
    }
}
