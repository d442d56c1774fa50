//! File formats, reports and commands behind the `lyapkit` binary.

pub mod args;
pub mod commands;
pub mod error;
pub mod format;
pub mod report;
