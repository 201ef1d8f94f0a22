//! Batch pipeline for structural VARMA models: simulate, estimate, order
//! selection, residual diagnostics, and impulse responses with bootstrap
//! confidence bands. Structured results are JSON; panel data is CSV.

mod commands;
mod config;
mod errors;
mod transform;

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CommandContext;
use config::RunConfig;
use errors::CliError;

#[derive(Parser)]
#[command(name = "svarma", version, about = "Structural VARMA estimation pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a sample path from the configured model
    Simulate(CommonArgs),
    /// Maximum-likelihood estimation on a data panel
    Estimate(CommonArgs),
    /// Fit an AIC grid over lag orders
    SelectOrder(CommonArgs),
    /// Residual diagnostics of a fitted model
    Diagnose(CommonArgs),
    /// Impulse responses, FEVD, and bootstrap bands
    Irf(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Run configuration JSON
    #[arg(long)]
    config: PathBuf,
    /// Input data CSV (header row of series names)
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory
    #[arg(long)]
    out: PathBuf,
    /// Seed override for simulation and bootstrap
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for bootstrap and grid fits (default: available cores)
    #[arg(long)]
    threads: Option<usize>,
    /// Identification scheme override: A, B, or C
    #[arg(long)]
    scheme: Option<char>,
    /// Bootstrap replication override (0 disables bands)
    #[arg(long)]
    bootstrap: Option<usize>,
    /// IRF horizon override
    #[arg(long)]
    horizon: Option<usize>,
}

fn load_config(path: &PathBuf) -> Result<RunConfig, CliError> {
    let body = fs::read_to_string(path)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    let cfg: RunConfig = serde_json::from_str(&body)
        .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    if cfg.schema_version != config::SCHEMA_VERSION {
        return Err(CliError::config(format!(
            "unsupported schema_version {} (expected {})",
            cfg.schema_version,
            config::SCHEMA_VERSION
        )));
    }
    if !matches!(cfg.options.scheme, 'A' | 'B' | 'C') {
        return Err(CliError::config(format!(
            "unknown scheme '{}'",
            cfg.options.scheme
        )));
    }
    Ok(cfg)
}

fn build_context(args: &CommonArgs) -> Result<CommandContext, CliError> {
    if let Some(threads) = args.threads {
        // ignore the error when a pool exists already
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    if let Some(s) = args.scheme {
        if !matches!(s, 'A' | 'B' | 'C') {
            return Err(CliError::config(format!("unknown scheme '{s}'")));
        }
    }
    Ok(CommandContext {
        config: load_config(&args.config)?,
        data: args.data.clone(),
        out: args.out.clone(),
        seed: args.seed,
        scheme: args.scheme,
        bootstrap: args.bootstrap,
        horizon: args.horizon,
    })
}

fn run() -> Result<(), CliError> {
    let cli = Cli::parse();
    match &cli.command {
        Command::Simulate(a) => commands::cmd_simulate(&build_context(a)?),
        Command::Estimate(a) => commands::cmd_estimate(&build_context(a)?),
        Command::SelectOrder(a) => commands::cmd_select_order(&build_context(a)?),
        Command::Diagnose(a) => commands::cmd_diagnose(&build_context(a)?),
        Command::Irf(a) => commands::cmd_irf(&build_context(a)?),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.kind.exit_code())
        }
    }
}
