//! Experiment runner for the `biggins` command.

pub mod config;
pub mod report;
pub mod run;

pub use config::{parse_config, ConfigError, Experiment, Params, RunConfig};
pub use report::{ExperimentReport, TestResult, SCHEMA};
pub use run::{run, ExitStatus};

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<String>,
}

/// Parses `text` for `experiment` and applies `overrides`.
pub fn load(text: &str, experiment: Experiment, overrides: &Overrides) -> Result<RunConfig, ConfigError> {
    let mut cfg = parse_config(text, Some(experiment))?;
    if let Some(seed) = overrides.seed {
        cfg.seed = seed;
    }
    if let Some(workers) = overrides.workers {
        if workers == 0 {
            return Err(ConfigError::Validation(vec!["workers must be positive".into()]));
        }
        cfg.workers = workers;
    }
    if let Some(out) = &overrides.out {
        cfg.out = Some(out.clone());
    }
    Ok(cfg)
}
