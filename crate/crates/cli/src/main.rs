//! `jostlab`: scattering data, bound states, resolvent kernels and dispersive
//! evolution for delta interactions at integer sites.
//!
//! Exit codes: 0 success, 2 configuration error, 3 domain or regime error,
//! 4 quadrature failure, 5 I/O error.

mod commands;
mod config;
mod error;
mod grid;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use crate::config::Config;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "jostlab", version, about = "Delta interactions on the line: scattering, spectrum, kernels, dispersive decay")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Wronskian, transmission b, reflection a₋ and unitarity residual over a λ grid (CSV).
    Scatter(Args),
    /// Bound states κ, energy −κ² and normalization constant (JSON).
    Spectrum(Args),
    /// Resolvent kernel G(λ² ± i0)(x, y) over λ, x and y grids (CSV).
    Kernel(Args),
    /// Sampled e^{itH}Pf over a t grid (CSV plus JSON summary).
    Evolve(Args),
    /// Sup-norm decay of e^{itH}Pf with a log-log fit (CSV of peaks plus JSON summary).
    DecayScan(Args),
    /// Born series against the Jost kernel in the high-energy regime (CSV).
    BornCheck(Args),
    /// Zero-energy Wronskian and resonance flag (JSON).
    Resonance(Args),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MethodArg {
    Stone,
    Oracle,
}

#[derive(Debug, Clone, Copy, Default, ValueEnum)]
enum SignArg {
    #[default]
    Plus,
    Minus,
}

#[derive(Debug, clap::Args)]
struct Args {
    /// JSON file {"alpha": [{"j": int, "value": float}, ...], "initial": {...}, "quad": {...}}.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output file; standard output when absent.
    #[arg(long, value_name = "PATH")]
    out: Option<PathBuf>,
    /// JSON summary for evolve and decay-scan; defaults to `<out>.summary.json`, or standard error.
    #[arg(long, value_name = "PATH")]
    summary: Option<PathBuf>,
    /// Spectral parameters `a:b:n`.
    #[arg(long, value_name = "a:b:n", allow_hyphen_values = true)]
    lambda_grid: Option<String>,
    /// Times `a:b:n`, geometrically spaced with `:log`.
    #[arg(long, value_name = "a:b:n[:log]", allow_hyphen_values = true)]
    t_grid: Option<String>,
    /// Positions `a:b:n`.
    #[arg(long, value_name = "a:b:n", allow_hyphen_values = true)]
    x_grid: Option<String>,
    /// Comma-separated source points y.
    #[arg(long, value_name = "Y[,Y...]", allow_hyphen_values = true)]
    y: Option<String>,
    /// Oracle grid step h; 1/h must be an integer.
    #[arg(long, value_name = "H")]
    grid_h: Option<f64>,
    /// Oracle grid half-width L.
    #[arg(long = "grid-L", value_name = "L")]
    grid_l: Option<f64>,
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Tolerance: resonance threshold for scatter and resonance, relative Born tolerance for born-check.
    #[arg(long, value_name = "X")]
    tol: Option<f64>,
    /// Largest number of Born terms.
    #[arg(long, value_name = "N")]
    terms: Option<usize>,
    /// Boundary value λ² + i0 (plus) or λ² − i0 (minus).
    #[arg(long, value_enum, default_value_t)]
    sign: SignArg,
    /// Evolve f instead of Pf (oracle method).
    #[arg(long)]
    no_project: bool,
}

fn configure_threads() -> CliResult<()> {
    let Ok(text) = std::env::var("JOSTLAB_THREADS") else { return Ok(()) };
    let n: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("JOSTLAB_THREADS must be a positive integer, got `{text}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("cannot size the thread pool: {e}")))
}

fn run(command: &Command) -> CliResult<()> {
    configure_threads()?;
    let args = match command {
        Command::Scatter(a)
        | Command::Spectrum(a)
        | Command::Kernel(a)
        | Command::Evolve(a)
        | Command::DecayScan(a)
        | Command::BornCheck(a)
        | Command::Resonance(a) => a,
    };
    let cfg = Config::load(&args.config)?;
    match command {
        Command::Scatter(_) => commands::scatter(&cfg, args),
        Command::Spectrum(_) => commands::spectrum(&cfg, args),
        Command::Kernel(_) => commands::kernel(&cfg, args),
        Command::Evolve(_) => commands::evolve_cmd(&cfg, args),
        Command::DecayScan(_) => commands::decay_scan_cmd(&cfg, args),
        Command::BornCheck(_) => commands::born_check(&cfg, args),
        Command::Resonance(_) => commands::resonance(&cfg, args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("jostlab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
