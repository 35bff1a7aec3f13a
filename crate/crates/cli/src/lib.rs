//! Files, reports and the command-line driver around `gausteer-core`.

pub mod cli;
pub mod error;
pub mod formats;
pub mod parallel;
pub mod report;
pub mod study;

pub use error::{CliError, Result};
