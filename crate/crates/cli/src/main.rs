//! `blowup-lab`: runs the experiments and writes their data files.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::{ExperimentConfig, SeedSpec};

#[derive(Debug, Parser)]
#[command(name = "blowup-lab", version, about = "Blow-up, Lotka-Volterra and burning experiments")]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Order of the equation (dimension of the Lotka-Volterra system).
    #[arg(long, global = true)]
    d: Option<usize>,
    /// Relative integration tolerance.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// End time of the run.
    #[arg(long = "t-end", global = true)]
    t_end: Option<f64>,
    /// Seed `N` or inclusive range `a..b`.
    #[arg(long, global = true)]
    seed: Option<SeedSpec>,
    /// Monte Carlo trials (restarts for `lyapunov-search`).
    #[arg(long, global = true)]
    trials: Option<usize>,
    /// Half-width `R` of the observation window `[-R, R]^d`.
    #[arg(long, global = true)]
    window: Option<f64>,
    /// Pixels per axis.
    #[arg(long, global = true)]
    resolution: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML file with any of the options above; flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate the equation and write the trajectory.
    Integrate,
    /// Estimate the blow-up time by shooting and by the series radius.
    EstimateT,
    /// Build the u, v, w trajectories and report their residuals.
    Timechange,
    /// Simulate the Lotka-Volterra system for each seed.
    LvSim,
    /// Time averages of a long Lotka-Volterra run.
    LvAverage,
    /// Exact leading minors for the published weights.
    LyapunovVerify,
    /// Search for diagonal Lyapunov weights.
    LyapunovSearch,
    /// Analytic and Monte Carlo unburned probabilities.
    BurnProb {
        /// Target unburned probabilities.
        #[arg(long = "p", value_delimiter = ',', default_values_t = vec![0.5, 0.1])]
        p: Vec<f64>,
    },
    /// Render the first-burner map as PPM.
    BurnRender,
    /// Exponent of the unburned probability near the blow-up time.
    BurnCoverage {
        /// Distances to the blow-up time.
        #[arg(long, value_delimiter = ',', default_values_t = vec![1e-2, 1e-3, 1e-4])]
        eps: Vec<f64>,
    },
    /// Run the acceptance suite.
    CheckAll {
        /// Only these criteria.
        #[arg(long, value_delimiter = ',')]
        only: Vec<u32>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let flags = ExperimentConfig {
        d: cli.common.d,
        tol: cli.common.tol,
        t_end: cli.common.t_end,
        seed: cli.common.seed,
        trials: cli.common.trials,
        window: cli.common.window,
        resolution: cli.common.resolution,
        out: cli.common.out.clone(),
    };
    let file = match cli.common.config.as_deref().map(ExperimentConfig::load).transpose() {
        Ok(f) => f.unwrap_or_default(),
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let cfg = flags.or(file);
    match commands::run(&cli.command, &cfg) {
        Ok(commands::Outcome::Pass) => ExitCode::SUCCESS,
        Ok(commands::Outcome::Fail(checks)) => {
            eprintln!("failed checks: {}", checks.join(", "));
            ExitCode::from(1)
        }
        Err(e) if e.is::<commands::UsageError>() => {
            eprintln!("usage error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
