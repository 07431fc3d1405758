//! Config-driven batch experiment runner. Configurations are strict TOML
//! (see [`config::ExperimentConfig`]); every run writes its data files plus
//! a manifest echoing the fully resolved configuration.

pub mod config;
pub mod emit;
pub mod runner;

pub use config::{ExperimentConfig, ExperimentKind};
pub use runner::{domain_count_probability, resolve_threads, run, sweep, RunReport};
