//! `cbtc-sim`: run jamming scenarios on a CBTC metro line and write
//! analysis-ready CSV/JSON.
//!
//! Exit codes: 0 success, 1 configuration or usage error, 2 I/O error.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cbtc_core::config::ConfigError;
use cbtc_core::output::{
    write_congestion_csv, write_demand_csv, write_passengers_csv, write_sinr_trace,
    write_summary_json, write_sweep_csv, write_trains_csv, SummaryDoc,
};
use cbtc_core::passengers::{gen_synthetic, PassengerError};
use cbtc_core::sim::{
    compare_runs, run_scenario, run_scenario_with, run_with_baseline, sweep_fhss, RunOptions,
    SampleSelection,
};
use cbtc_core::{ScenarioConfig, SimError};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(
    name = "cbtc-sim",
    version,
    about = "CBTC metro line co-simulator under signal jamming"
)]
struct Cli {
    /// Log verbosity (-v info, -vv debug); RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario; attacked scenarios also run their no-attack baseline.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweep the number of FHSS channels against the plain attack.
    SweepFhss {
        #[arg(long)]
        config: PathBuf,
        /// Channel counts, comma separated.
        #[arg(long = "n", value_delimiter = ',', num_args = 0..)]
        n: Vec<u32>,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to the number of CPUs.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Per-slot SINR of one train.
    SinrTrace {
        #[arg(long)]
        config: PathBuf,
        /// Dispatch number, counting from 1.
        #[arg(long)]
        train: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a synthetic tap-in dataset.
    GenPassengers {
        #[arg(long, default_value_t = cbtc_core::config::DEFAULT_MASTER_SEED)]
        seed: u64,
        #[arg(long, default_value_t = 30)]
        stations: u32,
        /// Tap-in window (s).
        #[arg(long, default_value_t = 7200.0)]
        duration: f64,
        /// Arrivals per origin station per second.
        #[arg(long, default_value_t = 0.05)]
        rate: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Parse and validate a config without running it.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    fn io(path: &Path, err: impl std::fmt::Display) -> Self {
        Self {
            code: 2,
            message: format!("{}: {err}", path.display()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(err: ConfigError) -> Self {
        let code = if matches!(err, ConfigError::Io { .. }) {
            2
        } else {
            1
        };
        Self {
            code,
            message: err.to_string(),
        }
    }
}

impl From<SimError> for Failure {
    fn from(err: SimError) -> Self {
        match err {
            SimError::Config(e) => e.into(),
            SimError::Passengers(e @ PassengerError::Io { .. }) => Self {
                code: 2,
                message: e.to_string(),
            },
            other => Self::usage(other.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn create(path: &Path) -> Result<BufWriter<File>, Failure> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Failure::io(dir, e))?;
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Failure::io(path, e))
}

fn write_with<T, E: std::fmt::Display>(
    path: &Path,
    f: impl FnOnce(&mut BufWriter<File>) -> Result<T, E>,
) -> CmdResult {
    let mut w = create(path)?;
    f(&mut w).map_err(|e| Failure::io(path, e))?;
    w.flush().map_err(|e| Failure::io(path, e))
}

fn cmd_run(config: &Path, out: &Path) -> CmdResult {
    let cfg = ScenarioConfig::load(config)?;
    fs::create_dir_all(out).map_err(|e| Failure::io(out, e))?;
    let opts = RunOptions::default();
    let (result, baseline, comparison) = if cfg.jammer.active {
        let (att, base) = run_with_baseline(&cfg, &opts)?;
        let cmp = compare_runs(&att, &base)?;
        (att, Some(base), Some(cmp))
    } else {
        (run_scenario(&cfg)?, None, None)
    };
    let epoch = cfg.sim.epoch_offset_s;
    write_with(&out.join("trains.csv"), |w| {
        write_trains_csv(w, &result, epoch)
    })?;
    write_with(&out.join("passengers.csv"), |w| {
        write_passengers_csv(w, &result.passengers)
    })?;
    write_with(&out.join("congestion.csv"), |w| {
        write_congestion_csv(w, &result.congestion)
    })?;
    let doc = SummaryDoc::new(&cfg, &result, baseline.as_ref(), comparison.as_ref());
    write_with(&out.join("summary.json"), |w| write_summary_json(w, &doc))?;

    let s = &result.summary;
    println!(
        "{} of {} trains completed, mean journey {:.2} min",
        s.trains_completed,
        s.trains_dispatched,
        s.mean_journey_s / 60.0
    );
    if let Some(cmp) = &comparison {
        println!(
            "attack: mean train increase {:.2}%, passenger journey increase {:.2}%",
            cmp.mean_train_pct_increase, cmp.passenger_pct_increase
        );
    }
    if result.safety.crossovers > 0 {
        log::warn!("{} train crossovers recorded", result.safety.crossovers);
    }
    Ok(())
}

fn cmd_sweep(config: &Path, n: &[u32], out: &Path, jobs: Option<usize>) -> CmdResult {
    let cfg = ScenarioConfig::load(config)?;
    if n.is_empty() {
        return Err(Failure::usage("--n needs at least one channel count"));
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = jobs {
        if j == 0 {
            return Err(Failure::usage("--jobs must be at least 1"));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool
        .build()
        .map_err(|e| Failure::usage(format!("thread pool: {e}")))?;
    let points = pool.install(|| sweep_fhss(&cfg, n))?;
    write_with(out, |w| write_sweep_csv(w, &points))?;
    for p in &points {
        println!(
            "n={}: train {:.2}%, passenger {:.2}%",
            p.n, p.train_pct_increase, p.passenger_pct_increase
        );
    }
    Ok(())
}

fn cmd_sinr_trace(config: &Path, train: usize, out: &Path) -> CmdResult {
    let cfg = ScenarioConfig::load(config)?;
    let count = cfg.dispatch_count();
    if train == 0 || train > count {
        return Err(Failure::usage(format!(
            "train {train} is not dispatched; the scenario dispatches trains 1..={count}"
        )));
    }
    let index = train - 1;
    let opts = RunOptions {
        samples: SampleSelection::Trains(vec![index]),
    };
    let result = run_scenario_with(&cfg, &opts)?;
    let samples = &result.trains[index].samples;
    write_with(out, |w| write_sinr_trace(w, samples))?;
    let lost = samples.iter().filter(|s| !s.pkt_rec).count();
    println!(
        "train {train}: {} slots, {lost} below threshold",
        samples.len()
    );
    Ok(())
}

fn cmd_gen_passengers(seed: u64, stations: u32, duration: f64, rate: f64, out: &Path) -> CmdResult {
    if !(rate >= 0.0 && rate.is_finite()) {
        return Err(Failure::usage(format!("--rate must be >= 0 (got {rate})")));
    }
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(Failure::usage(format!(
            "--duration must be >= 0 (got {duration})"
        )));
    }
    if stations < 2 {
        return Err(Failure::usage(format!(
            "--stations must be >= 2 (got {stations})"
        )));
    }
    let records = gen_synthetic(seed, stations, duration, rate);
    write_with(out, |w| write_demand_csv(w, &records))?;
    println!("{} passengers", records.len());
    Ok(())
}

fn cmd_validate(config: &Path) -> CmdResult {
    let cfg = ScenarioConfig::load(config)?;
    println!(
        "{}: ok ({} stations, {} trains, jammer {})",
        config.display(),
        cfg.signaling.num_stations,
        cfg.dispatch_count(),
        if cfg.jammer.active { "on" } else { "off" }
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = match &cli.command {
        Command::Run { config, out } => cmd_run(config, out),
        Command::SweepFhss {
            config,
            n,
            out,
            jobs,
        } => cmd_sweep(config, n, out, *jobs),
        Command::SinrTrace { config, train, out } => cmd_sinr_trace(config, *train, out),
        Command::GenPassengers {
            seed,
            stations,
            duration,
            rate,
            out,
        } => cmd_gen_passengers(*seed, *stations, *duration, *rate, out),
        Command::ValidateConfig { config } => cmd_validate(config),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
