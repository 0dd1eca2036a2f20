//! Scenario runner for `chernlab`: configuration, orchestration of flow runs
//! and monitors, and CSV persistence.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod runner;

pub use config::{config_hash, emit, parse_config, ScenarioConfig};
pub use error::{LabError, LabResult};
pub use runner::{run_scenario, RunRecord};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "CHERNLAB_OUT";

/// Version written at the head of every CSV file.
pub const SCHEMA_VERSION: u32 = 1;
