//! `steercert`: bounds, certificates, figure data and verification suites.
//!
//! Exit codes: 0 success, 1 verification failure, 2 invalid input.

mod commands;
mod config;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Input(_) | CliError::Io(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "steercert", version, about = "Fidelity certificates from steering-inequality violations")]
pub struct Cli {
    /// Worker threads for grid work [default: number of processors]
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// File of `key = value` defaults; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// LHS and quantum bounds of an inequality
    Bounds(Common),
    /// Figure data as CSV
    Curve(CurveArgs),
    /// SOS identities, self-testing relations, certificate margins and moment-matrix soundness
    Verify(VerifyArgs),
    /// Number of copies for an infidelity target
    Plan(PlanArgs),
}

/// Inequality selection shared by the subcommands.
#[derive(Debug, Clone, Args)]
pub struct Common {
    /// tilted-analog, two-trusted, two-untrusted, three-trusted or three-untrusted
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Ignored for tilted-analog [default: 1]
    #[arg(long)]
    beta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Figure {
    /// observed,F_DD,F_1SDI,F_DI for the tilted family
    Fig2,
    /// guessing probability against the 2- and 3-setting certified fidelities
    Fig3,
    /// moment-matrix sweep: observed,f_min,status,dual_gap
    Fig5,
}

#[derive(Debug, Args)]
struct CurveArgs {
    #[arg(long, value_enum)]
    figure: Figure,
    #[command(flatten)]
    common: Common,
    /// Lower end of the grid [default: LHS bound, or 0.5 for fig3]
    #[arg(long)]
    grid_min: Option<f64>,
    /// Upper end of the grid [default: quantum bound, or 1 for fig3]
    #[arg(long)]
    grid_max: Option<f64>,
    /// Grid size [default: 100, or 30 for fig5]
    #[arg(long)]
    grid_points: Option<usize>,
    /// Solver tolerance for fig5 [default: 1e-6]
    #[arg(long)]
    tol: Option<f64>,
    /// Write CSV here instead of stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// Seed for random settings and strategies [default: 1]
    #[arg(long)]
    seed: Option<u64>,
    /// Random draws per SOS id [default: 100]
    #[arg(long)]
    draws: Option<usize>,
    /// Perturb one MAIN_SOS1 weight by 1% (negative control)
    #[arg(long)]
    inject_fault: bool,
    /// Count the three-setting split construction towards the exit status
    #[arg(long)]
    strict: bool,
    /// Write the report here as well as stdout
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlanArgs {
    #[command(flatten)]
    common: Common,
    /// Infidelity target
    #[arg(long)]
    eps: Option<f64>,
    /// Significance level
    #[arg(long)]
    delta: Option<f64>,
    /// Certificate slope s; defaults to the analytic certificate of the family where one exists
    #[arg(long)]
    slope: Option<f64>,
}

fn run(cli: Cli) -> Result<String, CliError> {
    let file = match &cli.config {
        Some(p) => config::ConfigFile::load(p)?,
        None => config::ConfigFile::default(),
    };
    let workers = file.pick(cli.workers, "workers", config::default_workers())?.max(1);
    match cli.command {
        Command::Bounds(c) => commands::bounds(&commands::resolve(&file, &c, None, workers)?),
        Command::Curve(a) => commands::curve(&file, a.figure, &a.common, commands::CurveFlags {
            grid_min: a.grid_min,
            grid_max: a.grid_max,
            grid_points: a.grid_points,
            tol: a.tol,
            output: a.output,
        }, workers),
        Command::Verify(a) => {
            let seed = file.pick(a.seed, "seed", 1)?;
            let draws = file.pick(a.draws, "draws", 100)?;
            let output = file.pick_opt(a.output, "output")?;
            let report = verify::run(&verify::VerifyOptions { seed, draws, inject_fault: a.inject_fault, strict: a.strict, workers });
            let text = report.render();
            if let Some(p) = output {
                std::fs::write(p, &text)?;
            }
            if report.failures().is_empty() {
                Ok(text)
            } else {
                print!("{text}");
                Err(CliError::Verification(report.failures().join(", ")))
            }
        }
        Command::Plan(a) => {
            let cfg = commands::resolve(&file, &a.common, None, workers)?;
            let eps = file.pick_opt(a.eps, "eps")?.ok_or_else(|| CliError::Input("--eps is required".into()))?;
            let delta = file.pick_opt(a.delta, "delta")?.ok_or_else(|| CliError::Input("--delta is required".into()))?;
            let slope = file.pick_opt(a.slope, "slope")?;
            commands::plan(&cfg, eps, delta, slope)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(out) => {
            print!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("steercert: {e}");
            ExitCode::from(e.code())
        }
    }
}
