//! Rust frontend: builds the [`ProgramModel`] of a Cargo package.

pub mod layout;
pub mod walker;

use std::path::Path;

use rtj_core::model::{ModelBuilder, ModelError, Unit};
use rtj_core::ProgramModel;

pub use layout::{Package, Target};

#[derive(Debug, thiserror::Error)]
pub enum FrontendError {
    #[error("no Cargo package at {0}")]
    ProjectNotFound(String),
    #[error("invalid manifest: {0}")]
    Manifest(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{file}:{line}:{column}: parse error: {message}")]
    Parse { file: String, line: usize, column: usize, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl FrontendError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        FrontendError::Io { path: path.display().to_string(), source }
    }

    pub(crate) fn parse(file: &str, e: &syn::Error) -> Self {
        let start = e.span().start();
        FrontendError::Parse { file: file.to_string(), line: start.line, column: start.column + 1, message: e.to_string() }
    }
}

/// The model plus the layout facts later stages need.
pub struct Project {
    pub package: Package,
    pub model: ProgramModel,
    pub warnings: Vec<String>,
}

/// Parses every source file reachable from the package's targets. Units are
/// added in path order, so element ids depend only on the sources.
pub fn build_model(root: &Path) -> Result<Project, FrontendError> {
    let package = layout::discover(root)?;
    let reach = layout::reachable_files(&package)?;
    let mut b = ModelBuilder::new(package.name.clone());
    for (path, memberships) in &reach.files {
        let source = &reach.sources[path];
        let unit = b.add_unit(Unit::new(path.clone(), source.clone(), memberships.clone()));
        walker::walk_unit(&mut b, unit, path, source)?;
    }
    Ok(Project { package, model: b.finish(), warnings: reach.warnings })
}
