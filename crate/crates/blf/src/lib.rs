#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! File formats, pipelines and the command-line driver for label fusion.
//!
//! Matrices are stored as CSV with a `rows,cols` header; probability maps
//! are additionally written as 16-bit PGM for viewing. Every run writes a
//! `run.json` manifest (seed, config hash, versions) next to its outputs.

pub mod cli;
pub mod config;
pub mod error;
pub mod instance;
pub mod io;
pub mod pipeline;

pub use config::ModelConfig;
pub use error::{CliError, CliResult};
