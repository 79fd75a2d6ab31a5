//! Experiment orchestration: configuration, seeded ensembles, statistic
//! dispatch and reports.

pub mod config;
pub mod experiment;
pub mod report;

pub use config::{parse_config, parse_config_with, ExperimentConfig, Overrides, Statistic};
pub use experiment::{mc_ensemble, run_experiment, run_statistic, write_fields, write_paths, Context};
pub use report::{Report, StatisticOutcome, Verdict};
