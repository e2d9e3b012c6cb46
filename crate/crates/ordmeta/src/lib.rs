//! Files, threads, plots and the `ordmeta` command line on top of
//! `ordmeta-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod exec;
pub mod io;
pub mod manifest;
pub mod plot;
pub mod report;

pub use error::{Error, Result};
