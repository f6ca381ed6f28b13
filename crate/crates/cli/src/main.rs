use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::Context;
use clap::{Parser, Subcommand};

use satmimo::estimators::{average_and_tile, detect, mddsb_run, pls_estimate, zf_equalize, ChannelEstimate};
use satmimo::harness::{dump_scenario, run_campaign, write_channel_dump, write_csv};
use satmimo::numerics::{right_pinv, DEFAULT_PINV_TOL};
use satmimo::rng::SimRng;
use satmimo::{Experiment, Method, SystemConfig};

#[derive(Parser)]
#[command(name = "satmimo", version, about = "Massive-MIMO LEO uplink channel estimation simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a Monte Carlo campaign and write a metrics CSV.
    Simulate {
        /// fig2 (NMSE vs SNR), fig3 (NMSE vs block) or fig4 (SER vs SNR).
        experiment: Experiment,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Comma-separated SNR points in dB, overriding the experiment's grid.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        snr_list: Option<Vec<f64>>,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Write the steering matrix and effective channel of one scenario.
    DumpChannel {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: u64,
        /// Destination file; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Time the per-trial kernels on one scenario.
    Bench {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        repeats: usize,
    },
    /// Print the default configuration in file syntax.
    PrintDefaults,
}

/// Failure classes mapped to distinct exit codes.
enum Failure {
    Config(anyhow::Error),
    Run(anyhow::Error),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Config(_) => 1,
            Failure::Run(_) => 2,
        }
    }

    fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Config(e) | Failure::Run(e) => e,
        }
    }
}

fn load_config(path: Option<&PathBuf>) -> Result<SystemConfig, Failure> {
    match path {
        Some(p) => SystemConfig::load(p)
            .with_context(|| format!("config {}", p.display()))
            .map_err(Failure::Config),
        None => Ok(SystemConfig::default()),
    }
}

fn simulate(
    experiment: Experiment,
    config: Option<PathBuf>,
    trials: Option<usize>,
    seed: Option<u64>,
    snr_list: Option<Vec<f64>>,
    output: Option<PathBuf>,
    workers: Option<usize>,
) -> Result<(), Failure> {
    let mut cfg = load_config(config.as_ref())?;
    if let Some(n) = trials {
        cfg.trials = n;
    }
    if let Some(s) = seed {
        cfg.master_seed = s;
    }
    if let Some(list) = snr_list {
        match experiment {
            Experiment::Fig3 => cfg.fig3_snr_db = list,
            _ => cfg.snr_grid_db = list,
        }
    }
    if let Some(p) = output {
        cfg.output_path = Some(p);
    }
    if workers == Some(0) {
        return Err(Failure::Config(anyhow::anyhow!("--workers must be at least 1")));
    }
    cfg.validate().map_err(|e| Failure::Config(e.into()))?;
    let path = cfg
        .output_path
        .clone()
        .unwrap_or_else(|| PathBuf::from(format!("{experiment}.csv")));

    let report = run_campaign(&cfg, experiment, workers).map_err(|e| Failure::Run(e.into()))?;
    write_csv(&report.records, &path).map_err(|e| Failure::Run(e.into()))?;
    eprintln!(
        "{experiment}: {} records, {} of {} trials skipped, {:.2?} -> {}",
        report.records.len(),
        report.skipped.len(),
        report.attempted,
        report.elapsed,
        path.display()
    );
    for s in report.skipped.iter().take(5) {
        eprintln!("  skipped trial {} at {} dB: {}", s.trial_index, s.snr_db, s.error);
    }
    Ok(())
}

fn dump_channel(config: Option<PathBuf>, seed: u64, output: Option<PathBuf>) -> Result<(), Failure> {
    let cfg = load_config(config.as_ref())?;
    let state = dump_scenario(&cfg, seed).map_err(|e| Failure::Run(e.into()))?;
    let result = match &output {
        Some(p) => {
            let file = std::fs::File::create(p)
                .with_context(|| format!("creating {}", p.display()))
                .map_err(Failure::Run)?;
            write_channel_dump(&cfg, &state, std::io::BufWriter::new(file))
        }
        None => write_channel_dump(&cfg, &state, std::io::stdout().lock()),
    };
    result.map_err(|e| Failure::Run(e.into()))
}

fn time<T>(label: &str, repeats: usize, mut f: impl FnMut() -> T) {
    let start = Instant::now();
    for _ in 0..repeats {
        std::hint::black_box(f());
    }
    println!("{label:<24} {:>12.2?}", start.elapsed() / repeats as u32);
}

fn bench(config: Option<PathBuf>, repeats: usize) -> Result<(), Failure> {
    use rand::SeedableRng;
    let cfg = load_config(config.as_ref())?;
    let repeats = repeats.max(1);
    let fail = |e: anyhow::Error| Failure::Run(e);
    let state = dump_scenario(&cfg, cfg.master_seed).map_err(|e| fail(e.into()))?;
    let builder = cfg.frame_builder();
    let layout = builder.layout;
    let frame = builder
        .build(&state, 10.0, &mut SimRng::seed_from_u64(cfg.master_seed))
        .map_err(|e| fail(e.into()))?;
    let pinv = right_pinv(&state.steering, DEFAULT_PINV_TOL).map_err(|e| fail(e.into()))?;
    let raw = pls_estimate(&frame.rx_pilot, &frame.pilots, &pinv).map_err(|e| fail(e.into()))?;
    let initial = ChannelEstimate {
        values: average_and_tile(&raw, layout.d),
        window: layout.pilot_symbols(),
        method: Method::Pls,
    };
    let soft = zf_equalize(&frame.rx_data_block(1), &pinv, &initial.values).map_err(|e| fail(e.into()))?;

    println!("{:<24} {:>12}", "kernel", "mean");
    time("right_pinv", repeats, || right_pinv(&state.steering, DEFAULT_PINV_TOL));
    time("frame build", repeats, || {
        builder.build(&state, 10.0, &mut SimRng::seed_from_u64(1))
    });
    time("pls_estimate", repeats, || pls_estimate(&frame.rx_pilot, &frame.pilots, &pinv));
    time("zf_equalize", repeats, || zf_equalize(&frame.rx_data_block(1), &pinv, &initial.values));
    time("detect", repeats, || detect(&soft, &builder.constellation));
    time("mddsb_run", repeats, || {
        mddsb_run(&frame, &initial, &pinv, &layout, &builder.constellation)
    });
    Ok(())
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Simulate {
            experiment,
            config,
            trials,
            seed,
            snr_list,
            output,
            workers,
        } => simulate(experiment, config, trials, seed, snr_list, output, workers),
        Command::DumpChannel { config, seed, output } => dump_channel(config, seed, output),
        Command::Bench { config, repeats } => bench(config, repeats),
        Command::PrintDefaults => {
            let mut out = std::io::stdout().lock();
            out.write_all(SystemConfig::default().to_text().as_bytes())
                .map_err(|e| Failure::Run(e.into()))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error());
            ExitCode::from(f.code())
        }
    }
}
