use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use mmw_mec::checks::Effort;
use mmw_mec::harness::{Algorithm, SweepAxis};
use mmw_mec_cli::commands::{convergence_command, oracle_check_command, run_command, sweep_command, Outcome};
use mmw_mec_cli::config::{read_config, RunConfig};
use mmw_mec_cli::Format;

#[derive(Parser)]
#[command(name = "mmw-mec", version, about = "Two-timescale hybrid beamforming and task offloading simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Configuration file (`key: value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Start from the reduced-dimension scenario instead of the full-size one.
    #[arg(long, global = true)]
    desk_scale: bool,
    /// Algorithm; overrides the config. For `sweep`, restricts the sweep to it.
    #[arg(long, global = true)]
    algo: Option<Algo>,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate one scenario and write its slot records.
    Run,
    /// Mean latency per (axis value, algorithm).
    Sweep {
        #[arg(long, default_value = "p_ua")]
        axis: String,
        /// Comma-separated axis values.
        #[arg(long, value_delimiter = ',', default_values_t = [0.01, 0.02, 0.05, 0.1, 0.2])]
        values: Vec<f64>,
    },
    /// Analog learning curve and penalty-solver traces.
    Convergence {
        /// Monte-Carlo gain draws for the capacity estimates.
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
    /// Run every self-check against its brute-force oracle.
    OracleCheck {
        /// Fewer instances and shorter trend runs.
        #[arg(long)]
        quick: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Algo {
    Pcccp,
    Heuristic,
    Binary,
    IdealCsi,
}

impl From<Algo> for Algorithm {
    fn from(a: Algo) -> Self {
        match a {
            Algo::Pcccp => Algorithm::Pcccp,
            Algo::Heuristic => Algorithm::Heuristic,
            Algo::Binary => Algorithm::BinaryOffload,
            Algo::IdealCsi => Algorithm::IdealCsi,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn load(cli: &Cli) -> Result<RunConfig> {
    let base = if cli.desk_scale { RunConfig::desk_scale() } else { RunConfig::reference() };
    let mut c = match &cli.config {
        Some(p) => read_config(p, base)?,
        None => base,
    };
    if let Some(seed) = cli.seed {
        c.scenario.seed = seed;
    }
    if let Some(a) = cli.algo {
        c.scenario.algorithm = a.into();
    }
    Ok(c)
}

fn execute(cli: &Cli) -> Result<Outcome> {
    let format = match cli.format {
        FormatArg::Csv => Format::Csv,
        FormatArg::Json => Format::Json,
    };
    match &cli.command {
        Command::Run => run_command(&load(cli)?, &cli.out, format),
        Command::Sweep { axis, values } => {
            let axis: SweepAxis = axis.parse().context("--axis")?;
            let algorithms = match cli.algo {
                Some(a) => vec![a.into()],
                None => Algorithm::ALL.to_vec(),
            };
            sweep_command(&load(cli)?, axis, values, &algorithms, &cli.out)
        }
        Command::Convergence { samples } => convergence_command(&load(cli)?, *samples, &cli.out),
        Command::OracleCheck { quick } => {
            let effort = if *quick { Effort::Quick } else { Effort::Full };
            Ok(oracle_check_command(cli.seed.unwrap_or(0), effort))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(o) => {
            print!("{}", o.report);
            for p in &o.outputs {
                eprintln!("wrote {}", p.display());
            }
            if o.success {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
