//! Experiment harness for heavy-tailed activation networks: dataset
//! plumbing, synthetic benchmark generators, analysis curve emission,
//! and the tabular training/evaluation protocol behind the `htaf`
//! command-line tool.

pub mod analyze;
pub mod config;
pub mod data;
pub mod error;
pub mod experiment;
pub mod interpret;
pub mod synth;

pub use error::{CliError, Result};
