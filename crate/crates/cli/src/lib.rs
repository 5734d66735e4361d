//! Driver for the `qg` command: configuration, surface generators, pipeline
//! dumps, check suites and report aggregation.

pub mod commands;
pub mod config;
pub mod error;
pub mod generate;
pub mod pipeline;
pub mod report;
pub mod suites;
