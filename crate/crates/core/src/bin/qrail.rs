use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use qrail::calib::CompositeWeights;
use qrail::harness::{self, sweep, FederationConfig, HarnessError};

#[derive(Parser)]
#[command(name = "qrail", version, about = "Reliability-weighted quantum federated learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score calibration profiles and show the good/bad pools
    RankBackends {
        #[arg(long)]
        profiles: PathBuf,
        /// Composite weights for 1q,2q,readout,T1,T2
        #[arg(long, default_value = "1,5,2,1,1")]
        weights: CompositeWeights,
        /// Keep only backends with at least this many qubits
        #[arg(long)]
        qubits: Option<usize>,
    },
    /// Print per-client transpiled statistics and noise budgets
    Budget {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run every method and seed of a config
    Run {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one config per value of a swept key
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// KEY=V1,V2,... with a dotted key such as federation.rho
        #[arg(long)]
        axis: String,
    },
    /// Aggregate the run CSV files in a directory
    Report {
        #[arg(long)]
        runs: PathBuf,
    },
    /// Check a config and its referenced files without running
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

fn execute(command: Command) -> Result<(), HarnessError> {
    match command {
        Command::RankBackends { profiles, weights, qubits } => {
            print!("{}", harness::rank_table(&profiles, &weights, qubits)?);
        }
        Command::Budget { config } => {
            print!("{}", harness::budget_table(&FederationConfig::load(config)?)?);
        }
        Command::Run { config } => {
            let outcome = harness::run_config(&FederationConfig::load(config)?)?;
            print!("{}", harness::render_summary(&outcome.report));
            println!("outputs in {}", outcome.output_dir.display());
        }
        Command::Sweep { config, axis } => {
            let cfg = FederationConfig::load(config)?;
            let points = sweep::expand_sweep(&cfg, &axis)?;
            for (_, point) in &points {
                point.validate()?;
            }
            for (label, point) in points {
                let outcome = harness::run_config(&point)?;
                println!("== {label}");
                print!("{}", harness::render_summary(&outcome.report));
            }
        }
        Command::Report { runs } => {
            let report = harness::collect_runs(&runs)?;
            harness::write_report(&runs, &report)?;
            print!("{}", harness::render_summary(&report));
        }
        Command::Validate { config } => {
            let cfg = FederationConfig::load(&config)?;
            cfg.validate()?;
            println!("{}: ok", config.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
