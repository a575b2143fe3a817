//! Experiment runner: configuration, subcommands and output tables.

pub mod commands;
pub mod config;
pub mod table;

pub use commands::{render, run, Command, Output};
pub use config::{Format, RunConfig};
pub use table::{Cell, Table};
