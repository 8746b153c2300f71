//! Command-line driver: strict JSON configurations in, deterministic CSV
//! and JSON results out.
//!
//! The binary wires four subcommands to the library crates: probability
//! grids, transformed-box sweeps, threshold-tightened boxes, and seeded
//! closed-loop batches. Everything here is also callable as a library so
//! tests can drive the same code paths without spawning processes.

pub mod commands;
pub mod config;
pub mod emit;

pub use config::CliError;
