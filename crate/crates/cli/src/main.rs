//! `dfrc`: design receive-filter banks and run the radar, detection and
//! symbol-error experiments from a TOML configuration.
//!
//! Exit codes: 0 success, 1 runtime error, 2 configuration or feasibility
//! error. Failures print a JSON object on stderr.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] dfrc_core::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use dfrc_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::Dimension { .. } | E::InvalidArgument(_) | E::Infeasible(_)) => 2,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }

    fn kind(&self) -> &'static str {
        use dfrc_core::Error as E;
        match self {
            CliError::Config(_) => "config",
            CliError::Core(E::Dimension { .. }) => "dimension",
            CliError::Core(E::InvalidArgument(_)) => "invalid-argument",
            CliError::Core(E::Infeasible(_)) => "infeasible",
            CliError::Core(E::Conditioning { .. }) => "conditioning",
            CliError::Core(E::Serialization(_)) => "serialization",
            CliError::Core(E::Io(_)) | CliError::Io(_) => "io",
        }
    }
}

#[derive(Parser)]
#[command(name = "dfrc", version, about = "Coherent receive filters for pulse-coded radar-communication")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    /// TOML configuration, or a manifest.json from an earlier run.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Also write gnuplot scripts next to the CSV files.
    #[arg(long)]
    gnuplot: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Design the configured filter banks and score them.
    Design(RunArgs),
    /// Simulate the configured scenarios and write range-Doppler maps and detections.
    Radar(RunArgs),
    /// Monte-Carlo detection probability over an SNR grid.
    Pd(RunArgs),
    /// Monte-Carlo symbol error rate over an SNR grid.
    Ser(RunArgs),
    /// Check the closed-form designs against the dense nullspace solver.
    Selftest {
        #[arg(long, default_value_t = 100)]
        instances: usize,
        #[arg(long, default_value_t = 2024)]
        seed: u64,
    },
}

fn load(args: &RunArgs) -> Result<ExperimentConfig, CliError> {
    match &args.config {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let written = match cli.command {
        Command::Design(a) => commands::cmd_design(&load(&a)?, a.gnuplot)?,
        Command::Radar(a) => commands::cmd_radar(&load(&a)?, a.gnuplot)?,
        Command::Pd(a) => commands::cmd_pd(&load(&a)?, a.gnuplot)?,
        Command::Ser(a) => commands::cmd_ser(&load(&a)?, a.gnuplot)?,
        Command::Selftest { instances, seed } => {
            let report = commands::cmd_selftest(instances, seed)?;
            println!("{}", serde_json::to_string(&report).expect("report serializes"));
            if !report.pass {
                return Err(CliError::Core(dfrc_core::Error::Conditioning {
                    what: format!("selftest deviation exceeds {:e}", report.tolerance),
                    condition: report.worst_relative_deviation,
                }));
            }
            return Ok(());
        }
    };
    println!("wrote {}", written.display());
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let code = e.exit_code();
            let body = serde_json::json!({"error": {"kind": e.kind(), "message": e.to_string(), "exit_code": code}});
            eprintln!("{body}");
            ExitCode::from(code)
        }
    }
}
