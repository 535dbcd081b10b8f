//! Configuration, property suites and report emission behind the `nltv`
//! command-line tool.

pub mod cli;
pub mod commands;
pub mod config;
pub mod reference;
pub mod report;
pub mod suites;

pub use commands::{denoise, sweep, verify, Exit, Outcome, SweepParam};
pub use config::{DatumSpec, LevelsSpec, Overrides, RunConfig, Setup};
pub use report::{Check, Report, SuiteResult, SCHEMA_VERSION};
pub use suites::Suite;
