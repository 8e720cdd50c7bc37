//! Scenario runner for the qgauge sum-rule laboratory: configuration
//! parsing, rule dispatch and deterministic output writing.

pub mod config;
pub mod output;
pub mod rules;
pub mod runner;
