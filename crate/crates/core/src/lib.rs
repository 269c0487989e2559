//! Builds pruned, stand-alone reproduction packages for a failing test.
//!
//! The pipeline traces which sources, library classes, configuration,
//! resources and generated code a failing test actually needs, copies just
//! those into a fresh project, and validates that the copy fails with the
//! identical failure type and message.

pub mod backend;
pub mod configslice;
pub mod error;
pub mod fixtures;
mod fsutil;
pub mod gencode;
pub mod model;
pub mod pipeline;
pub mod reconstruct;
pub mod report;
pub mod resources;
pub mod tracer;

pub use error::{Error, Result};
pub use pipeline::{Created, Pipeline};
pub use reconstruct::ReportOptions;
