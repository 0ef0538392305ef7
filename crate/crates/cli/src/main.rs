//! `pharmonic`: solve, analyze and check planar p-harmonic maps from a TOML
//! run file.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Ctx, RadialArgs};
use config::{RadialMode, RunConfig};
use error::CliError;

#[derive(Parser)]
#[command(name = "pharmonic", version, about = "Numerical lab for planar p-harmonic maps")]
struct Cli {
    /// TOML run file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config. Defaults to `out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for data-parallel loops.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Multiplies every check tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    tolerance_scale: f64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the Dirichlet problem (or build the configured map) and write it.
    Solve,
    /// Curvatures, level curves, length function and complex-gradient bounds.
    Analyze {
        /// Read a written solution from this directory instead of solving.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Run the configured property checks.
    Check {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Radial profiles, the sector counterexample and admissible apertures.
    Radial {
        #[arg(long, value_enum)]
        mode: Option<RadialMode>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        c: Option<f64>,
        /// Sector grid resolution.
        #[arg(long)]
        n: Option<usize>,
    },
    /// Concatenate the summaries found in the output directory.
    Report,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    if !(cli.tolerance_scale > 0.0 && cli.tolerance_scale.is_finite()) {
        return Err(CliError::Usage("--tolerance-scale must be positive".into()));
    }
    let cfg = cli.config.as_deref().map(RunConfig::load).transpose()?;
    let base = cli
        .config
        .as_deref()
        .and_then(|p| p.parent())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("."));
    let out = cli
        .out
        .or_else(|| cfg.as_ref().and_then(|c| c.out.clone()))
        .unwrap_or_else(|| PathBuf::from("out"));
    let ctx = Ctx { cfg, base, out, tolerance_scale: cli.tolerance_scale };
    match cli.command {
        Command::Solve => commands::solve(&ctx),
        Command::Analyze { input } => commands::analyze(&ctx, input.as_deref()),
        Command::Check { input } => commands::check(&ctx, input.as_deref()),
        Command::Radial { mode, p, c, n } => commands::radial(&ctx, &RadialArgs { mode, p, c, n }),
        Command::Report => commands::report(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pharmonic: {e}");
            e.exit_code()
        }
    }
}
