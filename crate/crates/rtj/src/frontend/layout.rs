//! Package layout: compilation targets and the source files reachable from
//! each target root through `mod` declarations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rtj_core::model::{Membership, TargetKind};
use syn::{Attribute, Expr, ExprLit, Item, Lit, Meta};

use super::FrontendError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Target {
    pub kind: TargetKind,
    /// Cargo target name (`[lib]` name for the library).
    pub name: String,
    /// Root file, relative to the package root.
    pub root: PathBuf,
}

#[derive(Debug, Clone)]
pub struct Package {
    pub root: PathBuf,
    pub name: String,
    pub targets: Vec<Target>,
}

fn str_field<'a>(t: &'a toml::Table, key: &str) -> Option<&'a str> {
    t.get(key).and_then(|v| v.as_str())
}

fn bool_field(t: &toml::Table, key: &str) -> Option<bool> {
    t.get(key).and_then(|v| v.as_bool())
}

fn rel(p: &Path) -> String {
    p.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/")
}

fn stems(dir: &Path) -> Vec<(String, PathBuf)> {
    let Ok(rd) = std::fs::read_dir(dir) else { return Vec::new() };
    let mut out: Vec<(String, PathBuf)> = rd
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let path = e.path();
            let name = e.file_name().to_string_lossy().into_owned();
            if path.is_file() {
                name.strip_suffix(".rs").map(|s| (s.to_string(), PathBuf::from(&name)))
            } else if path.join("main.rs").is_file() {
                Some((name.clone(), PathBuf::from(name).join("main.rs")))
            } else {
                None
            }
        })
        .collect();
    out.sort();
    out
}

/// Reads `Cargo.toml` and lists library, binary and integration-test
/// targets, explicit entries first, then auto-discovered ones. Targets with
/// `test = false` or `harness = false` are left out: their tests cannot be
/// run one at a time through the standard harness.
pub fn discover(root: &Path) -> Result<Package, FrontendError> {
    let manifest = root.join("Cargo.toml");
    if !root.is_dir() || !manifest.is_file() {
        return Err(FrontendError::ProjectNotFound(root.display().to_string()));
    }
    let text = std::fs::read_to_string(&manifest).map_err(|e| FrontendError::io(&manifest, e))?;
    let doc: toml::Table =
        toml::from_str(&text).map_err(|e| FrontendError::Manifest(format!("{}: {e}", manifest.display())))?;
    let package = doc
        .get("package")
        .and_then(|p| p.as_table())
        .ok_or_else(|| FrontendError::Manifest(format!("{}: no [package] table", manifest.display())))?;
    let name = str_field(package, "name")
        .ok_or_else(|| FrontendError::Manifest(format!("{}: package has no name", manifest.display())))?
        .to_string();
    let runnable = |t: &toml::Table| bool_field(t, "test") != Some(false) && bool_field(t, "harness") != Some(false);

    let mut targets = Vec::new();
    let lib = doc.get("lib").and_then(|v| v.as_table());
    let lib_path = lib.and_then(|t| str_field(t, "path")).map(PathBuf::from).unwrap_or_else(|| "src/lib.rs".into());
    if root.join(&lib_path).is_file() && lib.is_none_or(runnable) {
        let lib_name = lib.and_then(|t| str_field(t, "name")).unwrap_or(&name).replace('-', "_");
        targets.push(Target { kind: TargetKind::Lib, name: lib_name, root: lib_path });
    }

    let mut explicit = |key: &str, default_dir: &str, make: fn(String) -> TargetKind| -> Vec<String> {
        let mut seen = Vec::new();
        for t in doc.get(key).and_then(|v| v.as_array()).into_iter().flatten().filter_map(|v| v.as_table()) {
            let Some(tname) = str_field(t, "name") else { continue };
            seen.push(tname.to_string());
            let path = str_field(t, "path").map(PathBuf::from).unwrap_or_else(|| {
                let flat = Path::new(default_dir).join(format!("{tname}.rs"));
                if root.join(&flat).is_file() { flat } else { Path::new(default_dir).join(tname).join("main.rs") }
            });
            if runnable(t) && root.join(&path).is_file() {
                targets.push(Target { kind: make(tname.to_string()), name: tname.to_string(), root: path });
            }
        }
        seen
    };
    let explicit_bins = explicit("bin", "src/bin", TargetKind::Bin);
    let explicit_tests = explicit("test", "tests", TargetKind::Test);

    if bool_field(package, "autobins") != Some(false) {
        if root.join("src/main.rs").is_file() && !targets.iter().any(|t| t.root == Path::new("src/main.rs")) {
            targets.push(Target { kind: TargetKind::Bin(name.clone()), name: name.clone(), root: "src/main.rs".into() });
        }
        for (stem, file) in stems(&root.join("src/bin")) {
            let path = Path::new("src/bin").join(file);
            if !explicit_bins.contains(&stem) && !targets.iter().any(|t| t.root == path) {
                targets.push(Target { kind: TargetKind::Bin(stem.clone()), name: stem, root: path });
            }
        }
    }
    if bool_field(package, "autotests") != Some(false) {
        for (stem, file) in stems(&root.join("tests")) {
            let path = Path::new("tests").join(file);
            if !explicit_tests.contains(&stem) && !targets.iter().any(|t| t.root == path) {
                targets.push(Target { kind: TargetKind::Test(stem.clone()), name: stem, root: path });
            }
        }
    }
    Ok(Package { root: root.to_path_buf(), name, targets })
}

/// Value of a `#[path = "..."]` attribute.
fn path_attr(attrs: &[Attribute]) -> Option<String> {
    attrs.iter().find_map(|a| match &a.meta {
        Meta::NameValue(nv) if nv.path.is_ident("path") => match &nv.value {
            Expr::Lit(ExprLit { lit: Lit::Str(s), .. }) => Some(s.value()),
            _ => None,
        },
        _ => None,
    })
}

struct ModWalk<'a> {
    root: &'a Path,
    target: &'a TargetKind,
    files: &'a mut BTreeMap<String, Vec<Membership>>,
    sources: &'a mut BTreeMap<String, String>,
    warnings: &'a mut Vec<String>,
}

impl ModWalk<'_> {
    /// `dir` is where child modules of `items` live; `mod_path` is the
    /// module path of `items` inside the target; `top` is false inside
    /// inline modules.
    fn items(
        &mut self,
        file_dir: &Path,
        dir: &Path,
        items: &[Item],
        mod_path: &[String],
        top: bool,
    ) -> Result<(), FrontendError> {
        for item in items {
            let Item::Mod(m) = item else { continue };
            let name = m.ident.to_string();
            let mut child_path = mod_path.to_vec();
            child_path.push(name.clone());
            let explicit = path_attr(&m.attrs);
            match &m.content {
                Some((_, inner)) => {
                    let inner_dir = match &explicit {
                        Some(p) => dir.join(p),
                        None => dir.join(&name),
                    };
                    self.items(file_dir, &inner_dir, inner, &child_path, false)?;
                }
                None => {
                    let candidates: Vec<PathBuf> = match &explicit {
                        // A `path` on an out-of-line module at file level is
                        // relative to the declaring file's directory.
                        Some(p) if top => vec![file_dir.join(p)],
                        Some(p) => vec![dir.join(p)],
                        None => vec![dir.join(format!("{name}.rs")), dir.join(&name).join("mod.rs")],
                    };
                    match candidates.iter().find(|c| self.root.join(c).is_file()) {
                        Some(file) => self.file(file, &child_path, false)?,
                        None => self.warnings.push(format!(
                            "module `{}` declared in {} has no source file",
                            child_path.join("::"),
                            rel(file_dir)
                        )),
                    }
                }
            }
        }
        Ok(())
    }

    fn file(&mut self, file: &Path, mod_path: &[String], is_root: bool) -> Result<(), FrontendError> {
        let key = rel(file);
        let membership = Membership { target: self.target.clone(), module_path: mod_path.to_vec(), is_root };
        let entry = self.files.entry(key.clone()).or_default();
        if entry.iter().any(|m| m.target == membership.target) {
            return Ok(());
        }
        entry.push(membership);
        let source = match self.sources.get(&key) {
            Some(s) => s.clone(),
            None => {
                let abs = self.root.join(file);
                let s = std::fs::read_to_string(&abs).map_err(|e| FrontendError::io(&abs, e))?;
                self.sources.insert(key.clone(), s.clone());
                s
            }
        };
        let parsed = syn::parse_file(&source).map_err(|e| FrontendError::parse(&key, &e))?;
        let file_dir = file.parent().map(Path::to_path_buf).unwrap_or_default();
        let stem = file.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let owns_dir = is_root || stem == "mod";
        let dir = if owns_dir { file_dir.clone() } else { file_dir.join(&stem) };
        self.items(&file_dir, &dir, &parsed.items, mod_path, true)
    }
}

/// Source files reachable from the package's targets, by relative path,
/// with the targets each belongs to, plus their text.
pub struct Reachable {
    pub files: BTreeMap<String, Vec<Membership>>,
    pub sources: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

pub fn reachable_files(pkg: &Package) -> Result<Reachable, FrontendError> {
    let mut files = BTreeMap::new();
    let mut sources = BTreeMap::new();
    let mut warnings = Vec::new();
    for target in &pkg.targets {
        let mut walk = ModWalk {
            root: &pkg.root,
            target: &target.kind,
            files: &mut files,
            sources: &mut sources,
            warnings: &mut warnings,
        };
        walk.file(&target.root, &[], true)?;
    }
    Ok(Reachable { files, sources, warnings })
}
