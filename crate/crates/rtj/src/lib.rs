//! Rotten green test detection for Cargo packages.
//!
//! The pipeline: [`frontend::build_model`] parses the package,
//! [`instrument`] writes a probed copy, [`runner`] builds it and runs each
//! test in its own process, the analyzers from `rtj_core` label the passing
//! tests, and [`report`] / [`apply`] emit the results.

pub mod apply;
pub mod config;
pub mod frontend;
pub mod instrument;
pub mod pipeline;
pub mod report;
pub mod runner;
pub mod trace_file;

pub use pipeline::{analyze, AnalyzeOptions, Analysis, PipelineError};
