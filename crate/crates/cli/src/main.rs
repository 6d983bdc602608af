use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use heterodg_cli::commands::{self, CliError, Context};
use heterodg_cli::config::RunConfig;

#[derive(Parser)]
#[command(name = "heterodg", version, about = "Discontinuous Galerkin solver for the heterodimer prion model")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Overrides the output directory of the configuration.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Suppresses progress and report output.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Runs a manufactured-solution convergence study and checks its rates.
    Converge {
        /// Configuration file.
        #[arg(long)]
        config: PathBuf,
    },
    /// Runs a seeded simulation and writes biomarker, staging and field output.
    Simulate {
        /// Configuration file.
        #[arg(long)]
        config: PathBuf,
    },
    /// Prints admissibility, equilibria and wave speed of the model section.
    Analyze {
        /// Configuration file.
        #[arg(long)]
        config: PathBuf,
    },
    /// Validates a mesh file and prints its diagnostics.
    Checkmesh {
        /// Mesh file to validate.
        path: PathBuf,
    },
    /// Writes the grid of the mesh section to a mesh file.
    ExportGrid {
        /// Configuration file.
        #[arg(long)]
        config: PathBuf,
        /// Destination mesh file.
        output: PathBuf,
    },
}

fn configure_threads() -> Result<(), CliError> {
    let Ok(value) = std::env::var("HETERODG_THREADS") else { return Ok(()) };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("HETERODG_THREADS must be a positive integer, found {value:?}")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Config(e.to_string()))
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    let ctx = Context { output_dir: cli.output_dir, quiet: cli.quiet };
    match cli.command {
        Command::Converge { config } => commands::converge(&RunConfig::load(config)?, &ctx),
        Command::Simulate { config } => commands::simulate_cmd(&RunConfig::load(config)?, &ctx),
        Command::Analyze { config } => commands::analyze(&RunConfig::load(config)?, &ctx),
        Command::Checkmesh { path } => commands::checkmesh(&path, &ctx),
        Command::ExportGrid { config, output } => commands::export_grid(&RunConfig::load(config)?, &output, &ctx),
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
