//! Configuration, seeded Monte Carlo campaigns and CSV output.

mod campaign;
mod config;
mod output;

pub use campaign::{
    run_campaign, run_trial, run_trials, CampaignError, CampaignReport, Experiment, SkippedTrial, TrialCell, TrialError,
    TrialResult, MAX_SKIPPED_FRACTION,
};
pub use config::{ConfigError, PlsWindow, SystemConfig};
pub use output::{dump_scenario, read_csv, sort_records, write_channel_dump, write_csv, write_records, OutputError, CSV_HEADER};
