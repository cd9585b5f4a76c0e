mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::CliError;

#[derive(Parser, Debug)]
#[command(name = "abundant", version, about = "Abundant manifolds and their affine hypersurfaces")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the abundant-manifold conditions of a system.
    Verify(RunArgs),
    /// Build the hypersurface data and dump it at the sample points.
    Build(RunArgs),
    /// Check the Gauss, Codazzi and trace equations of the built hypersurface.
    Integrability(RunArgs),
    /// Integrate the immersion on a grid, write an OBJ mesh and fit the result.
    Reconstruct(RunArgs),
    /// Evaluate the geometric predicates.
    Classify(RunArgs),
    /// Rescale conformally and compare both routes.
    Conformal(ConformalArgs),
    /// Inspect the built-in catalog.
    #[command(subcommand)]
    Catalog(CatalogCommand),
}

#[derive(Args, Debug, Clone)]
pub struct RunArgs {
    /// TOML spec file, or `catalog:NAME` for a built-in system.
    pub spec: String,
    /// Residual tolerance (classification threshold for `classify`).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Grid counts per axis, e.g. `10x10` (a single number applies to every axis).
    #[arg(long)]
    pub grid: Option<String>,
    /// Number of seeded random sample points added to the grid.
    #[arg(long)]
    pub random: Option<usize>,
    /// Integration step.
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Jet order cap; commands needing more fail.
    #[arg(long)]
    pub order: Option<usize>,
    /// Skip the precondition checks of `build` and the commands built on it.
    #[arg(long)]
    pub force: bool,
    /// Directory for report.json and mesh files.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug, Clone)]
pub struct ConformalArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Conformal factor expression; defaults to the spec file's `omega`, then to a seeded random factor.
    #[arg(long)]
    pub omega: Option<String>,
}

#[derive(Subcommand, Debug)]
enum CatalogCommand {
    /// Print the entry names.
    List,
    /// Print one entry as JSON.
    Get { name: String },
    /// Write one entry as a TOML spec file (to stdout without --out).
    Export {
        name: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Verify(a) => commands::verify(&a),
        Command::Build(a) => commands::build(&a),
        Command::Integrability(a) => commands::integrability(&a),
        Command::Reconstruct(a) => commands::reconstruct(&a),
        Command::Classify(a) => commands::classify(&a),
        Command::Conformal(a) => commands::conformal(&a),
        Command::Catalog(CatalogCommand::List) => commands::catalog_list(),
        Command::Catalog(CatalogCommand::Get { name }) => commands::catalog_get(&name),
        Command::Catalog(CatalogCommand::Export { name, out }) => commands::catalog_export(&name, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
