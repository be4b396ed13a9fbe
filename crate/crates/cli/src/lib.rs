//! Configuration loading and command dispatch for the `nilmix` binary.

pub mod commands;
pub mod config;

pub use commands::{execute, exit_code, Command, Outcome, Overrides};
