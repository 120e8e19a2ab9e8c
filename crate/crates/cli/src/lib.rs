//! Command-line driver: TOML run configs, trajectory CSVs, JSON manifests and sweeps.

pub mod commands;
pub mod config;
pub mod output;
pub mod sweep;
