//! Library surface of the experiment runner, shared with the CLI binary
//! and the acceptance suite.

pub mod config;
pub mod emit;
pub mod runner;
