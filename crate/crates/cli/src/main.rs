//! `billiard-lab`: reproducible command-line driver for symplectic billiard
//! studies on ellipses and radially deformed ellipses.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "billiard-lab",
    version,
    about = "Symplectic billiards in ellipses and deformed ellipses: phase portraits, periodic orbits, verification harnesses, closest-ellipse iteration"
)]
struct Cli {
    /// JSON study configuration; built-in defaults are used when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for CSV/JSON outputs
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Worker threads for study sweeps (0 = library default)
    #[arg(long, global = true, default_value_t = 0)]
    workers: usize,

    /// Config overrides, dotted.path=JSON (repeatable)
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    sets: Vec<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Iterate the billiard map from a grid of initial phase points
    PhasePortrait,
    /// Solve a q-periodic orbit and export it
    Orbit,
    /// Run a verification harness; exit 0 iff its assertions pass
    Verify {
        #[arg(value_enum)]
        suite: Suite,
    },
    /// Run the closest-ellipse iteration on the configured domain
    Fit,
    /// Quick end-to-end self checks
    Selftest,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum Suite {
    ActionQuadratic,
    Equidistribution,
    Suppression,
    Witness,
    Symmdiff,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(commands::EXIT_SOLVER)
        }
    }
}

fn run(cli: &Cli) -> anyhow::Result<u8> {
    if let Command::Selftest = cli.command {
        return Ok(commands::selftest());
    }
    let cfg = config::load(cli.config.as_deref(), &cli.sets)?;
    let workers = if cli.workers > 0 { cli.workers } else { cfg.workers };
    let dispatch = || -> anyhow::Result<u8> {
        match &cli.command {
            Command::PhasePortrait => commands::phase_portrait(&cfg, &cli.out),
            Command::Orbit => commands::orbit(&cfg, &cli.out),
            Command::Verify { suite } => commands::verify(&cfg, &cli.out, *suite),
            Command::Fit => commands::fit(&cfg, &cli.out),
            Command::Selftest => unreachable!(),
        }
    };
    if workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()?;
        pool.install(dispatch)
    } else {
        dispatch()
    }
}
