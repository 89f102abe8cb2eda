//! Core of the rotten green test analyzer.
//!
//! A rotten green test is a passing test that contains an assertion (or a
//! call to an assertion-carrying helper) that never runs. This crate holds
//! everything that does not touch the filesystem or a process:
//!
//! - [`model`]: the program model, an element-indexed statement tree built by
//!   a language frontend through [`model::ModelBuilder`].
//! - [`query`]: static identification of tests, assertion sites, helpers,
//!   helper calls and guard returns.
//! - [`trace`]: per-test outcomes and element hit counts.
//! - [`analysis`]: the analyzer interface, the built-in analyzers and the
//!   per-test pipeline.
//! - [`refactor`]: refactoring proposals and text-edit application.
//! - [`report`]: the serializable report and its summary.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod model;
pub mod pattern;
pub mod query;
pub mod refactor;
pub mod report;
pub mod rules;
pub mod trace;

pub use analysis::{Category, Label};
pub use model::{ElementId, ProgramModel, SourceLocation};
pub use rules::Rules;
pub use trace::DynamicTrace;
