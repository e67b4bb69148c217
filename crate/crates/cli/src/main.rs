//! `rldp`: solve, simulate and reproduce large-deviation experiments for
//! reflected jump-diffusions. All output is CSV.
//!
//! Exit status: 0 on success, 1 on I/O failure, 2 on a configuration or
//! usage error, 3 when a solve, oracle or simulation fails.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{CrnArgs, SimulateMode, Target};
use config::RunConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "rldp", version, about = "Large deviations of reflected jump-diffusions")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output CSV file (a directory for `simulate --split`); stdout if
    /// omitted and the config has no [output] path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for θ sweeps and path batches.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides sim.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Principal eigenvalue on every θ of the grid.
    Solve {
        /// Also write the eigenfunctions as (theta, x, u) rows.
        #[arg(long)]
        eigenfunction: Option<PathBuf>,
    },
    /// ψ curve over the θ grid (must contain 0), checked for convexity.
    Curve,
    /// Rate function ψ*(x) by Legendre transform.
    Rate {
        /// Points at which to evaluate ψ*.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        x: Vec<f64>,
        /// Read the curve from a (theta, psi) CSV instead of solving.
        #[arg(long)]
        curve: Option<PathBuf>,
    },
    /// Simulated paths, or Monte Carlo estimates of ψ.
    Simulate {
        /// One CSV per path inside the --out directory.
        #[arg(long, conflicts_with = "estimate")]
        split: bool,
        /// Emit (1/T) log E exp(θΛ(T)) for every θ of the grid.
        #[arg(long)]
        estimate: bool,
    },
    /// Closed-form ψ for rbm and birth-death models.
    Oracle,
    /// Re-runs one of the reference experiments.
    Reproduce {
        #[arg(value_enum)]
        target: Target,
        /// System size of the network comparisons.
        #[arg(long, default_value_t = 1000)]
        n: usize,
        /// Interior mesh nodes for the diffusion approximation.
        #[arg(long = "mesh", default_value_t = 1000)]
        mesh: usize,
        /// Step of the centered derivatives at θ = 0.
        #[arg(long, default_value_t = 0.01)]
        dtheta: f64,
    },
}

fn load(cli: &Cli) -> Result<RunConfig, CliError> {
    match &cli.config {
        Some(p) => RunConfig::load(p),
        None => Err(CliError::Config("this command needs --config".into())),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    if let Command::Reproduce {
        target,
        n,
        mesh,
        dtheta,
    } = &cli.command
    {
        let crn = CrnArgs {
            n: *n,
            mesh: *mesh,
            dtheta: *dtheta,
        };
        return commands::reproduce(*target, &crn, cli.out.as_deref());
    }
    if let Command::Rate { x, curve: Some(curve) } = &cli.command {
        return commands::rate(None, Some(curve), x, cli.out.as_deref());
    }
    let cfg = load(&cli)?;
    let out = cli.out.clone().or_else(|| cfg.output.as_ref().map(|o| o.path.clone()));
    let out = out.as_deref();
    match &cli.command {
        Command::Solve { eigenfunction } => commands::solve(&cfg, out, eigenfunction.as_deref()),
        Command::Curve => commands::curve(&cfg, out),
        Command::Rate { x, .. } => commands::rate(Some(&cfg), None, x, out),
        Command::Simulate { split, estimate } => {
            let mode = match (split, estimate) {
                (_, true) => SimulateMode::Estimate,
                (true, false) => SimulateMode::SplitPaths,
                (false, false) => SimulateMode::Paths,
            };
            commands::simulate_cmd(&cfg, cli.seed, mode, out)
        }
        Command::Oracle => commands::oracle(&cfg, out),
        Command::Reproduce { .. } => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rldp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
