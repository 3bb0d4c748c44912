//! Batch front-end for `m2spec`: TOML/JSON run configurations, the `M2SF`
//! field-file format and the `simulate`, `estimate`, `compare` and
//! `montecarlo` commands.

pub mod commands;
pub mod config;
pub mod error;
pub mod fieldfile;

pub use error::{CliError, Result};
