mod commands;
mod flags;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::flags::{
    Fig1Args, GlassoArgs, HeatmapArgs, NbselArgs, RocArgs, ScreenArgs, SimulateArgs, StabilityArgs,
    Table1Args,
};

#[derive(Debug, Parser)]
#[command(
    name = "grass",
    version,
    about = "Graph screening by thresholding sample correlations"
)]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Output directory.
    #[arg(
        long,
        global = true,
        env = "GRASS_OUT_DIR",
        default_value = "grass-out"
    )]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Threshold the sample correlation matrix of a data file.
    Screen(ScreenArgs),
    /// Generate one synthetic instance.
    Simulate(SimulateArgs),
    /// Error rates of the screening rule at several false positive levels.
    Table1(Table1Args),
    /// True versus false positive curves along each tuning path.
    Roc(RocArgs),
    /// Precision against covariance entries of one instance.
    Fig1(Fig1Args),
    /// Adjacency matrices averaged over replicates.
    Heatmaps(HeatmapArgs),
    /// Split-half agreement between screening and the graphical lasso.
    Stability(StabilityArgs),
    /// Graphical lasso on a data file.
    Glasso(GlassoArgs),
    /// Neighborhood selection on a data file.
    Nbsel(NbselArgs),
}

/// Failure reported to the caller as a JSON record on stderr.
#[derive(Debug, Serialize)]
pub struct CliError {
    pub kind: &'static str,
    pub message: String,
    pub exit_code: u8,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            kind: "configuration",
            message: message.into(),
            exit_code: 2,
        }
    }
}

impl From<grass::Error> for CliError {
    fn from(e: grass::Error) -> Self {
        use grass::Error as E;
        let (kind, exit_code) = match &e {
            E::InvalidArgument(_) => ("invalid_argument", 2),
            E::Domain(_) => ("domain", 2),
            E::Configuration(_) => ("configuration", 2),
            E::SizeGuard { .. } => ("size_guard", 2),
            E::DecompositionFailure { .. } => ("decomposition", 3),
            E::DegenerateColumn { .. } => ("degenerate_column", 3),
            E::Parse { .. } => ("parse", 3),
            E::Io(_) => ("io", 3),
            E::LassoNonConvergence { .. } | E::GlassoNonConvergence { .. } => {
                ("non_convergence", 4)
            }
            E::NodeRegression { source, .. } if source.is_non_convergence() => {
                ("non_convergence", 4)
            }
            E::NodeRegression { .. } => ("node_regression", 3),
        };
        CliError {
            kind,
            message: e.to_string(),
            exit_code,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

fn run(cli: Cli) -> CliResult<()> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(CliError::config("--threads must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| CliError::config(e.to_string()))?;
    }
    let out = cli.out.as_path();
    match cli.command {
        Command::Screen(a) => commands::screen(a, out),
        Command::Simulate(a) => commands::simulate(a, out),
        Command::Table1(a) => commands::table1(a, out),
        Command::Roc(a) => commands::roc(a, out),
        Command::Fig1(a) => commands::fig1(a, out),
        Command::Heatmaps(a) => commands::heatmaps(a, out),
        Command::Stability(a) => commands::stability(a, out),
        Command::Glasso(a) => commands::glasso(a, out),
        Command::Nbsel(a) => commands::nbsel(a, out),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let record = serde_json::json!({ "error": e });
            eprintln!("{record}");
            ExitCode::from(e.exit_code)
        }
    }
}
