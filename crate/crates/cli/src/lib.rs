//! Configuration-driven experiment runner for the perturbation toolkit.

pub mod config;
pub mod experiments;
pub mod ingest;
pub mod svg;

pub use config::{parse_config, parse_config_str, ConfigError, ExperimentConfig, Kind};
pub use experiments::{run_experiment, Artifacts, RunError, RunOptions};
pub use ingest::{ingest_csv, Dataset, IngestError, Schema};
