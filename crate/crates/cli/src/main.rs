//! `dyncool`: run cooling protocols, dump rate tables, solve dark-state conditions and manage
//! presets.

mod commands;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::Failure;

#[derive(Parser)]
#[command(name = "dyncool", version, about = "Dynamical laser cooling of a trapped atom beyond the Lamb-Dicke regime")]
struct Cli {
    /// Cap on worker threads; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate a protocol and write the occupation time series.
    Run(RunArgs),
    /// Write the empty rates (or the full rate matrix) of one pulse.
    Rates(RatesArgs),
    /// Solve dark-state conditions.
    #[command(subcommand)]
    Dark(DarkCommand),
    /// List or export the built-in protocols.
    #[command(subcommand)]
    Presets(PresetsCommand),
}

/// Where the experiment comes from.
#[derive(Args, Clone)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Built-in preset name (see `presets list`).
    #[arg(long)]
    pub preset: Option<String>,
    /// Configuration file, or `-` for standard input.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub source: Source,
    /// Propagation engine: `master` or `mc`.
    #[arg(long)]
    pub mode: Option<String>,
    /// Monte Carlo trajectory count.
    #[arg(long)]
    pub trajectories: Option<usize>,
    /// Monte Carlo seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Override the number of cycles.
    #[arg(long)]
    pub cycles: Option<usize>,
    /// Level to track, `n` in 1D or `nx,ny` in 2D; repeatable, the first is written to the CSV.
    #[arg(long = "target")]
    pub targets: Vec<String>,
    /// Rate model: `resonant` or `full`.
    #[arg(long)]
    pub rate_mode: Option<String>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "dyncool-out")]
    pub out_dir: PathBuf,
    /// Also write `plot.svg`.
    #[arg(long)]
    pub plot: bool,
    /// Also write the final level distribution (master mode).
    #[arg(long)]
    pub distribution: bool,
}

#[derive(Args)]
pub struct RatesArgs {
    #[command(flatten)]
    pub source: Source,
    /// Zero-based pulse index within the cycle.
    #[arg(long)]
    pub pulse: usize,
    /// Write every rate `Γ(n ← m)` instead of the empty rates.
    #[arg(long)]
    pub matrix: bool,
    /// Rate model: `resonant` or `full`.
    #[arg(long)]
    pub rate_mode: Option<String>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum DarkCommand {
    /// Lamb-Dicke parameters at which level `m` is dark under detuning `s`.
    Level {
        #[arg(long)]
        m: usize,
        #[arg(long, allow_hyphen_values = true)]
        s: i64,
    },
    /// Amplitude ratio that darkens a 2D level under an `s = 0` pulse.
    Ratio {
        #[arg(long)]
        eta: f64,
        /// Level as `mx,my`.
        #[arg(long)]
        target: String,
    },
}

#[derive(Subcommand)]
pub enum PresetsCommand {
    /// Print every preset name with its description.
    List,
    /// Print a preset as a configuration file.
    Export {
        name: String,
        /// Output file; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Failure::usage("--threads must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::usage(format!("cannot size the thread pool: {e}")))?;
    }
    match cli.command {
        Command::Run(args) => commands::run(&args, cli.threads),
        Command::Rates(args) => commands::rates(&args),
        Command::Dark(cmd) => commands::dark(&cmd),
        Command::Presets(cmd) => commands::presets(&cmd),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
