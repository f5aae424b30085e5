//! Std companion to `lgtm-core`: file formats, backend registry, dataset
//! ingestion, report emitters, the `lgtm` CLI and the HTTP job service.

pub mod cli;
pub mod dataset;
mod error;
pub mod formats;
pub mod registry;
pub mod report;
pub mod service;
pub mod spec_json;

pub use error::{Error, Result};
pub use lgtm_core as core;
