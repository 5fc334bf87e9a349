//! `hopcons`: experiments on delayed consensus over n-hop controller
//! architectures.
//!
//! Exit codes: 0 success, 2 usage, 3 invalid input, 4 numerical failure.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Args, Parser, Subcommand};

use config::{ExperimentConfig, GraphKind};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Input(String),
    #[error(transparent)]
    Core(#[from] hopcons_core::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Core(e) if e.is_numerical() => 4,
            CliError::Core(_) => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "hopcons",
    version,
    about = "Delayed consensus on n-hop architectures"
)]
struct Cli {
    /// Worker threads for parallel sweeps (default: one per core).
    #[arg(long, global = true, env = "HOPCONS_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate or load a base graph and print its summary.
    Graph(GraphCmd),
    /// n-hop closure of an edge list.
    Closure(ClosureCmd),
    /// Design a gain matrix for one architecture.
    Design(DesignCmd),
    /// Convergence rate of a gain file or of one sweep cell.
    Rate(RateCmd),
    /// Sweep hop counts under a delay model.
    Sweep(SweepCmd),
    /// Simulate a designed gain and compare the decay with the prediction.
    Simulate(SimulateCmd),
}

/// Base graph: an edge-list file or a generator.
#[derive(Args, Debug, Default)]
pub struct GraphArgs {
    /// Edge-list file.
    #[arg(long = "in", value_name = "PATH")]
    pub input: Option<PathBuf>,
    /// Generator.
    #[arg(long = "type", value_enum)]
    pub graph: Option<GraphKind>,
    /// Number of nodes.
    #[arg(long)]
    pub n: Option<usize>,
    /// Degree for regular graphs (default 3).
    #[arg(long)]
    pub degree: Option<usize>,
    /// Seed for random generators (default 1).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated cluster sizes for clustered graphs.
    #[arg(long, value_delimiter = ',')]
    pub cluster_sizes: Option<Vec<usize>>,
    #[arg(long)]
    pub p_intra: Option<f64>,
    #[arg(long)]
    pub p_inter: Option<f64>,
}

impl GraphArgs {
    fn to_config(&self) -> ExperimentConfig {
        ExperimentConfig {
            graph: self.graph,
            input: self.input.clone(),
            n: self.n,
            degree: self.degree,
            seed: self.seed,
            cluster_sizes: self.cluster_sizes.clone(),
            p_intra: self.p_intra,
            p_inter: self.p_inter,
            ..Default::default()
        }
    }
}

#[derive(Args, Debug)]
pub struct GraphCmd {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// JSON experiment config; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write the effective config here.
    #[arg(long)]
    pub save_config: Option<PathBuf>,
    /// Edge-list output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ClosureCmd {
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    #[arg(long)]
    pub hops: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct DesignCmd {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Hop count of the architecture.
    #[arg(long, default_value_t = 1)]
    pub hops: usize,
    /// Delay in steps.
    #[arg(long, conflicts_with = "delay")]
    pub tau: Option<usize>,
    /// Delay model: linear, quadratic, or table:<path>.
    #[arg(long)]
    pub delay: Option<String>,
    #[arg(long, default_value = "uniform-optimal")]
    pub strategy: String,
    /// Gain JSON output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct RateCmd {
    /// Gain JSON produced by `design`.
    #[arg(long, conflicts_with_all = ["input", "graph", "delay"])]
    pub gain: Option<PathBuf>,
    #[command(flatten)]
    pub graph: GraphArgs,
    #[arg(long, default_value_t = 1)]
    pub hops: usize,
    #[arg(long, conflicts_with = "delay")]
    pub tau: Option<usize>,
    #[arg(long)]
    pub delay: Option<String>,
    #[arg(long, default_value = "uniform-optimal")]
    pub strategy: String,
}

#[derive(Args, Debug)]
pub struct SweepCmd {
    #[command(flatten)]
    pub graph: GraphArgs,
    /// Delay model: linear, quadratic, or table:<path> (default linear).
    #[arg(long)]
    pub delay: Option<String>,
    /// `all` or a comma-separated list (default all).
    #[arg(long)]
    pub strategies: Option<String>,
    /// Include the complete closure (default true).
    #[arg(long, action = ArgAction::Set)]
    pub include_complete: Option<bool>,
    /// CSV output; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Summary JSON output.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub save_config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SimulateCmd {
    /// Gain JSON produced by `design`.
    #[arg(long)]
    pub gain: PathBuf,
    /// Delay in steps (default: the one stored in the gain file).
    #[arg(long)]
    pub tau: Option<usize>,
    #[arg(long)]
    pub horizon: usize,
    /// Seed of the initial state.
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Steps skipped by the rate fit (default horizon / 4).
    #[arg(long)]
    pub burn_in: Option<usize>,
    /// Run designs that fail the stability check.
    #[arg(long)]
    pub allow_unstable: bool,
    /// Trajectory CSV output; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Metadata JSON output.
    #[arg(long)]
    pub meta: Option<PathBuf>,
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Graph(c) => commands::graph(c),
        Command::Closure(c) => commands::closure(c),
        Command::Design(c) => commands::design(c),
        Command::Rate(c) => commands::rate(c),
        Command::Sweep(c) => commands::sweep(c),
        Command::Simulate(c) => commands::simulate(c),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    match cli.threads {
        Some(0) => {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        Some(t) => pool = pool.num_threads(t),
        None => {}
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(4);
        }
    };
    match pool.install(|| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Core(hopcons_core::Error::Optimizer { best_weights, .. }) = &e {
                eprintln!("best weights: {best_weights:?}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}
