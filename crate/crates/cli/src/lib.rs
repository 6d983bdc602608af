//! Configuration and commands behind the `heterodg` binary.

pub mod commands;
pub mod config;
