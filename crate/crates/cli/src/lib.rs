//! Scenario runner: reads a JSON config, runs every point it describes and
//! writes CSV series, a JSON summary and a checksummed manifest.

pub mod config;
pub mod output;
pub mod run;

pub use config::{validate_config, ConfigError, Scenario, ScenarioConfig};
pub use run::{run, RunError, RunManifest};

/// Output directory used when neither `--out` nor the config names one.
pub const OUT_ENV: &str = "QFEEDBACK_OUT";
pub const DEFAULT_OUT: &str = "out";
