//! Experiment harness for ideal-point and metric estimation: an experiment
//! runner with CSV trial/aggregate outputs, admissions-style data
//! ingestion, eigenstructure reporting, and the `prefmetric` CLI.

pub mod cli;
pub mod config;
pub mod experiment;
pub mod ingest;
pub mod io;
pub mod report;

pub use cli::cli_main;
