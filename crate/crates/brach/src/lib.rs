//! Command-line driver for `brach-core`: configuration, solution store,
//! exports and reference comparisons.

pub use brach_core as core;

pub mod cli;
pub mod config;
pub mod error;
pub mod export;
pub mod reproduce;
pub mod run;
pub mod store;

pub use error::{CliError, Result};
