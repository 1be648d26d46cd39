//! File formats, run configuration and subcommands of the `calfsbm` tool.

pub mod commands;
pub mod config;
pub mod io;
pub mod study;
