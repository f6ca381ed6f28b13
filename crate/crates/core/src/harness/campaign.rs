//! Trial execution and aggregation.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use thiserror::Error;

use super::config::{PlsWindow, SystemConfig};
use crate::airlink::{AirlinkError, FrameLayout};
use crate::channel::{reference_channel, sample_scenario, ChannelError};
use crate::estimators::{
    average_and_tile, ddsb_estimate, detect, genie_detect, mddsb_run, mddsb_run_with, pbound_estimate, pls_estimate,
    zf_equalize, ChannelEstimate, DataAid, EstimationError, Method,
};
use crate::metrics::{nmse, MetricError, MetricRecord};
use crate::numerics::{right_pinv, LinalgError, DEFAULT_PINV_TOL};
use crate::rng::{substream_seed, trial_rng};

/// The three experiment families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    /// NMSE against SNR of P-LS and DD-SB at the first data block.
    Fig2,
    /// NMSE against block index of MDD-SB, P-bound and the known-data run.
    Fig3,
    /// SER against SNR of MDD-SB, P-bound and the genie-aided detector.
    Fig4,
}

impl Experiment {
    pub const ALL: [Experiment; 3] = [Experiment::Fig2, Experiment::Fig3, Experiment::Fig4];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Fig2 => "fig2",
            Experiment::Fig3 => "fig3",
            Experiment::Fig4 => "fig4",
        }
    }

    /// SNR points the experiment sweeps under `cfg`.
    pub fn snr_points(self, cfg: &SystemConfig) -> &[f64] {
        match self {
            Experiment::Fig3 => &cfg.fig3_snr_db,
            _ => &cfg.snr_grid_db,
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment `{s}` (expected fig2, fig3 or fig4)"))
    }
}

/// Anything that can abort a single trial.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TrialError {
    #[error("scenario: {0}")]
    Channel(#[from] ChannelError),
    #[error("frame: {0}")]
    Airlink(#[from] AirlinkError),
    #[error("estimation: {0}")]
    Estimation(#[from] EstimationError),
    #[error("linear algebra: {0}")]
    Linalg(#[from] LinalgError),
    #[error("metric: {0}")]
    Metric(#[from] MetricError),
    #[error("non-finite {what} for {method}")]
    NonFinite { what: &'static str, method: Method },
}

/// One metric value produced by a trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialCell {
    pub method: Method,
    pub block: Option<usize>,
    pub nmse: Option<f64>,
    pub ser: Option<f64>,
}

impl TrialCell {
    fn nmse(method: Method, block: usize, value: f64) -> Self {
        Self {
            method,
            block: Some(block),
            nmse: Some(value),
            ser: None,
        }
    }

    fn ser(method: Method, block: usize, value: f64) -> Self {
        Self {
            method,
            block: Some(block),
            nmse: None,
            ser: Some(value),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial_index: u64,
    pub snr_db: f64,
    /// Seed of the trial's random substream.
    pub seed: u64,
    pub cells: Vec<TrialCell>,
    pub elapsed: Duration,
}

/// A trial that was attempted but could not complete.
#[derive(Debug, Clone, PartialEq)]
pub struct SkippedTrial {
    pub trial_index: u64,
    pub snr_db: f64,
    pub error: TrialError,
}

/// Runs trial `trial_index` of `experiment` at `snr_db`.
///
/// The outcome depends only on the arguments: the trial draws from its own
/// substream of `cfg.master_seed`.
pub fn run_trial(cfg: &SystemConfig, trial_index: u64, snr_db: f64, experiment: Experiment) -> Result<TrialResult, TrialError> {
    let start = Instant::now();
    let seed = substream_seed(cfg.master_seed, experiment.name(), snr_db, trial_index);
    let mut rng = trial_rng(cfg.master_seed, experiment.name(), snr_db, trial_index);
    let state = sample_scenario(&mut rng, &cfg.scenario())?;
    let mut builder = cfg.frame_builder();
    builder.layout = match experiment {
        Experiment::Fig2 => builder.layout.truncated(1),
        Experiment::Fig3 => builder.layout,
        Experiment::Fig4 => builder.layout.truncated(cfg.ser_blocks.iter().copied().max().unwrap_or(1)),
    };
    let layout: FrameLayout = builder.layout;
    let timing = builder.timing;
    let frame = builder.build(&state, snr_db, &mut rng)?;
    let pinv = right_pinv(&state.steering, DEFAULT_PINV_TOL)?;

    let raw_pls = pls_estimate(&frame.rx_pilot, &frame.pilots, &pinv)?;
    let pls = ChannelEstimate {
        values: average_and_tile(&raw_pls, layout.d),
        window: layout.pilot_symbols(),
        method: Method::Pls,
    };

    let mut cells = Vec::new();
    match experiment {
        Experiment::Fig2 => {
            let pls_window = match cfg.fig2_pls_window {
                PlsWindow::Pilot => layout.pilot_symbols(),
                PlsWindow::Data => layout.block_symbols(1),
            };
            let truth = reference_channel(&state, &timing, pls_window.clone());
            let e_pls = nmse(&truth, &average_and_tile(&raw_pls, pls_window.len()))?;
            cells.push(TrialCell::nmse(Method::Pls, 1, e_pls));

            let soft = zf_equalize(&frame.rx_data_block(1), &pinv, &pls.values)?;
            let detected = detect(&soft, &builder.constellation);
            let raw_sb = ddsb_estimate(&frame.rx_pilot, &frame.rx_data_block(1), &frame.pilots, &detected.hard, &pinv)?;
            let truth = reference_channel(&state, &timing, 0..layout.p + layout.d);
            let e_sb = nmse(&truth, &average_and_tile(&raw_sb, layout.p + layout.d))?;
            cells.push(TrialCell::nmse(Method::DdSb, 1, e_sb));
        }
        Experiment::Fig3 => {
            let truth = reference_channel(&state, &timing, layout.pilot_symbols());
            cells.push(TrialCell::nmse(Method::Pls, 0, nmse(&truth, &pls.tiled(layout.p))?));

            let pbound = pbound_estimate(&state, &timing, &layout);
            let tracked = mddsb_run(&frame, &pls, &pinv, &layout, &builder.constellation)?;
            let known = mddsb_run_with(
                &frame,
                &pls,
                &pinv,
                &layout,
                &builder.constellation,
                |b| layout.is_update_block(b),
                DataAid::Known,
            )?;
            for (mdd, kd) in tracked.iter().zip(&known).filter(|(m, _)| m.updated) {
                let block = mdd.block;
                let truth = reference_channel(&state, &timing, layout.block_symbols(block));
                cells.push(TrialCell::nmse(Method::MddSb, block, nmse(&truth, &mdd.estimate.values)?));
                cells.push(TrialCell::nmse(Method::MddSbKnownData, block, nmse(&truth, &kd.estimate.values)?));
                cells.push(TrialCell::nmse(Method::PBound, block, nmse(&truth, &pbound.values)?));
            }
        }
        Experiment::Fig4 => {
            let pbound = pbound_estimate(&state, &timing, &layout);
            let tracked = mddsb_run(&frame, &pls, &pinv, &layout, &builder.constellation)?;
            for &block in &cfg.ser_blocks {
                let mdd = &tracked[block - 1];
                cells.push(TrialCell::ser(Method::MddSb, block, rate(mdd.detection.symbol_error_rate())));

                let soft = zf_equalize(&frame.rx_data_block(block), &pinv, &pbound.values)?;
                let det = detect(&soft, &builder.constellation).with_truth(&frame.data_block(block));
                cells.push(TrialCell::ser(Method::PBound, block, rate(det.symbol_error_rate())));

                let ga = genie_detect(&frame, &state, &timing, &pinv, &builder.constellation, block)?;
                cells.push(TrialCell::ser(Method::Genie, block, rate(ga.symbol_error_rate())));
            }
        }
    }

    for cell in &cells {
        if cell.nmse.is_some_and(|v| !v.is_finite()) {
            return Err(TrialError::NonFinite {
                what: "NMSE",
                method: cell.method,
            });
        }
    }
    Ok(TrialResult {
        trial_index,
        snr_db,
        seed,
        cells,
        elapsed: start.elapsed(),
    })
}

fn rate(v: Option<f64>) -> f64 {
    v.expect("detections carry ground truth")
}

/// Runs trials `indices` at one SNR on the current rayon pool, returning
/// outcomes in index order.
pub fn run_trials(
    cfg: &SystemConfig,
    experiment: Experiment,
    snr_db: f64,
    indices: std::ops::Range<u64>,
) -> Vec<Result<TrialResult, SkippedTrial>> {
    indices
        .into_par_iter()
        .map(|trial_index| {
            run_trial(cfg, trial_index, snr_db, experiment).map_err(|error| SkippedTrial {
                trial_index,
                snr_db,
                error,
            })
        })
        .collect()
}

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("{skipped} of {attempted} trials skipped at {snr_db} dB (limit 1%); first: {first}")]
    TooManySkipped {
        skipped: usize,
        attempted: usize,
        snr_db: f64,
        first: String,
    },
    #[error("cannot start worker pool: {0}")]
    Pool(String),
}

/// Aggregated output of a campaign.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignReport {
    pub experiment: Experiment,
    pub records: Vec<MetricRecord>,
    pub skipped: Vec<SkippedTrial>,
    pub attempted: usize,
    pub elapsed: Duration,
}

/// Largest share of skipped trials a campaign tolerates.
pub const MAX_SKIPPED_FRACTION: f64 = 0.01;

/// Runs `cfg.trials` trials at every SNR point of `experiment` and averages
/// each (method, block) cell over the completed trials.
///
/// `workers` sizes the thread pool (`None` uses rayon's default). Trials are
/// folded in index order, so the result does not depend on scheduling.
pub fn run_campaign(cfg: &SystemConfig, experiment: Experiment, workers: Option<usize>) -> Result<CampaignReport, CampaignError> {
    let start = Instant::now();
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().map_err(|e| CampaignError::Pool(e.to_string()))?;

    let mut records = Vec::new();
    let mut skipped_all = Vec::new();
    let mut attempted = 0;
    for &snr_db in experiment.snr_points(cfg) {
        let outcomes = pool.install(|| run_trials(cfg, experiment, snr_db, 0..cfg.trials as u64));
        attempted += outcomes.len();
        // running sums, None until some trial reports the metric
        let mut sums: BTreeMap<(Method, Option<usize>), [Option<f64>; 2]> = BTreeMap::new();
        let mut completed = 0;
        let mut skipped = Vec::new();
        for outcome in outcomes {
            match outcome {
                Ok(trial) => {
                    completed += 1;
                    for cell in trial.cells {
                        let entry = sums.entry((cell.method, cell.block)).or_default();
                        for (acc, v) in entry.iter_mut().zip([cell.nmse, cell.ser]) {
                            if let Some(v) = v {
                                *acc = Some(acc.unwrap_or(0.0) + v);
                            }
                        }
                    }
                }
                Err(skip) => skipped.push(skip),
            }
        }
        if skipped.len() as f64 > MAX_SKIPPED_FRACTION * cfg.trials as f64 {
            return Err(CampaignError::TooManySkipped {
                skipped: skipped.len(),
                attempted: cfg.trials,
                snr_db,
                first: skipped[0].error.to_string(),
            });
        }
        let n = completed as f64;
        for ((method, block), [nmse_sum, ser_sum]) in sums {
            records.push(MetricRecord {
                method,
                snr_db,
                block,
                nmse: nmse_sum.map(|v| v / n),
                ser: ser_sum.map(|v| v / n),
                trials: completed,
                seed: cfg.master_seed,
            });
        }
        skipped_all.extend(skipped);
    }
    super::output::sort_records(&mut records);
    Ok(CampaignReport {
        experiment,
        records,
        skipped: skipped_all,
        attempted,
        elapsed: start.elapsed(),
    })
}
