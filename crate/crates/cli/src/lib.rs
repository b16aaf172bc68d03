//! Command-line front end: ingestion, report writing and the subcommands.

pub mod cli;
pub mod commands;
pub mod ingest;
pub mod numfmt;
pub mod report;
