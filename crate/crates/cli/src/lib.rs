//! Scenario runner for the `wbs` laboratory: config parsing, the phase
//! pipeline, CSV/JSON reports and the bundled suite.

pub mod config;
pub mod error;
pub mod report;
pub mod run;

use std::path::Path;

pub use config::{bundled, Scenario, ScenarioConfig};
pub use error::CliError;
pub use run::{run_scenario, Phases, RunManifest, Status};

/// Reads and validates a scenario file.
pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    ScenarioConfig::from_json(&text, &path.display().to_string())
}

/// Runs every bundled scenario into `out_dir`, in name order.
pub fn run_suite(out_dir: &Path) -> Result<Vec<RunManifest>, CliError> {
    bundled()
        .into_iter()
        .map(|(name, text)| {
            let cfg = ScenarioConfig::from_json(text, name)?;
            run_scenario(&cfg, out_dir, Phases::ALL)
        })
        .collect()
}
