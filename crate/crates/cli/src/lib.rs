//! Experiment drivers, configuration and result files for the `cvxrelax` binary.

pub mod commands;
pub mod config;
pub mod experiments;
pub mod output;
pub mod verify;
