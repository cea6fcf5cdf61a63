mod commands;
mod error;
mod output;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qgraph::coupling::CheckMode;
use std::path::PathBuf;

use commands::Context;
use error::{CliError, EXIT_OK, EXIT_USAGE};

/// Spectra and resonances of quantum graphs and their fat-graph approximations.
#[derive(Parser)]
#[command(name = "qgraph", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for every randomized stage.
    #[arg(long, global = true, default_value_t = 42)]
    seed: u64,
    /// Directory for all outputs.
    #[arg(long, global = true, default_value = ".")]
    outdir: PathBuf,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "warn")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues of a compact graph from the secular equation.
    GraphSpec(GraphSpecArgs),
    /// Embedded eigenvalues and resonances of a graph with leads.
    GraphRes(GraphResArgs),
    /// Neumann eigenvalues of the fat graph.
    FatSpec(FatSpecArgs),
    /// ε-sweep of eigenvalues and defect functionals.
    Converge(ConvergeArgs),
    /// Random inequality suite on one fat graph.
    Check(CheckArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Emit {
    Csv,
    Json,
}

fn parse_mode(s: &str) -> Result<CheckMode, String> {
    s.parse::<CheckMode>().map_err(|e| e.to_string())
}

#[derive(Args)]
pub struct GraphSpecArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub lambda_max: f64,
    #[arg(long, value_delimiter = ',', default_value = "csv")]
    pub emit: Vec<Emit>,
}

#[derive(Args)]
pub struct GraphResArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// re_min,re_max,im_min,im_max in the k plane.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, num_args = 1)]
    pub window: Vec<f64>,
    /// Dilation angle for the oracle, e.g. `0.5i`.
    #[arg(long, default_value = "0.5i", allow_hyphen_values = true)]
    pub theta: String,
    /// Confirm each root with the dilated finite-difference operator.
    #[arg(long)]
    pub oracle: bool,
    #[arg(long, value_delimiter = ',', default_value = "csv")]
    pub emit: Vec<Emit>,
}

#[derive(Args)]
pub struct FatSpecArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub eps: f64,
    /// Mesh size (default ε/8).
    #[arg(long)]
    pub hmesh: Option<f64>,
    #[arg(long)]
    pub lambda_max: f64,
    /// Also write nodes.csv, triangles.csv and regions.csv under `mesh/`.
    #[arg(long)]
    pub dump_mesh: bool,
    #[arg(long, value_delimiter = ',', default_value = "csv")]
    pub emit: Vec<Emit>,
}

#[derive(Args)]
pub struct ConvergeArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "0.2,0.1,0.05")]
    pub eps: Vec<f64>,
    #[arg(long, default_value_t = 4)]
    pub kmax: usize,
    #[arg(long, value_delimiter = ',', value_parser = parse_mode)]
    pub checks: Vec<CheckMode>,
    #[arg(long, value_delimiter = ',', default_value = "csv,json")]
    pub emit: Vec<Emit>,
    /// Mesh size as a multiple of ε.
    #[arg(long, default_value_t = 0.125)]
    pub h_factor: f64,
    /// lo,hi for the projection and eigenfunction defects.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub interval: Option<Vec<f64>>,
    /// Λ for the Hausdorff distance of the spectra on [0, Λ].
    #[arg(long)]
    pub hausdorff: Option<f64>,
    /// Skip the h/2 refinement gate.
    #[arg(long)]
    pub no_gate: bool,
}

#[derive(Args)]
pub struct CheckArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long, default_value_t = 0.1)]
    pub eps: f64,
    #[arg(long)]
    pub hmesh: Option<f64>,
    #[arg(long, default_value_t = 100)]
    pub samples: usize,
    #[arg(long, value_delimiter = ',', value_parser = parse_mode, default_value = "cn,vx,trace")]
    pub modes: Vec<CheckMode>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Invalid(format!("--threads {n}: {e}")))?;
    }
    let ctx = Context {
        outdir: cli.outdir,
        seed: cli.seed,
    };
    match &cli.command {
        Command::GraphSpec(a) => commands::graph_spec(&ctx, a),
        Command::GraphRes(a) => commands::graph_res(&ctx, a),
        Command::FatSpec(a) => commands::fat_spec(&ctx, a),
        Command::Converge(a) => commands::converge(&ctx, a),
        Command::Check(a) => commands::check(&ctx, a),
    }
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    env_logger::Builder::new()
        .filter_level(cli.log_level)
        .format_timestamp(None)
        .init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
