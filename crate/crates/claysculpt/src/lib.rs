//! Files, parallel candidate evaluation, run reports, and the `claysculpt`
//! command line, on top of `claysculpt-core`.

pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod parallel;
pub mod report;

pub use error::{Error, Result};
