use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use mhksc_cli::{ExportFormat, RunConfig};
use mhksc_core::{BenchmarkSpec, Error, ErrorClass};

/// Multilevel hierarchical kernel spectral clustering of large networks.
#[derive(Parser)]
#[command(name = "mhksc", version)]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a two-level planted-partition benchmark.
    Generate(GenerateArgs),
    /// Cluster a network and write the hierarchy.
    Cluster(ClusterArgs),
    /// Score every level of a saved tree.
    Evaluate(EvaluateArgs),
    /// Render a saved tree.
    Export(ExportArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Output directory for graph.edges and the truth partitions.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 2000)]
    nodes: usize,
    /// Number of macro communities.
    #[arg(long = "macro", default_value_t = 9)]
    n_macro: usize,
    /// Number of micro communities.
    #[arg(long = "micro", default_value_t = 37)]
    n_micro: usize,
    #[arg(long, default_value_t = 0.1)]
    mu1: f64,
    #[arg(long, default_value_t = 0.2)]
    mu2: f64,
    #[arg(long, default_value_t = 20.0)]
    avg_degree: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct ClusterArgs {
    /// Edge list, one "u v" pair per line.
    #[arg(long)]
    input: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0.15)]
    t0: f64,
    #[arg(long, default_value_t = 10)]
    maxk: usize,
    #[arg(long, default_value_t = 0.15)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0.15)]
    valid_fraction: f64,
    #[arg(long, default_value_t = 10_000)]
    cap: usize,
    #[arg(long, default_value_t = 10_000)]
    max_cluster: usize,
    #[arg(long, default_value_t = 10_000)]
    max_ground: usize,
    #[arg(long, default_value_t = 1024)]
    chunk: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    tree: PathBuf,
    /// The edge list the tree was computed from.
    #[arg(long)]
    graph: PathBuf,
    /// Ground-truth partition files ("node<TAB>community" per line).
    #[arg(long = "truth")]
    truths: Vec<PathBuf>,
    /// Write <prefix>.tsv and <prefix>.json instead of printing.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    tree: PathBuf,
    /// dot or membership.
    #[arg(long, default_value = "dot")]
    format: String,
    /// Finest level to include.
    #[arg(long)]
    level: Option<usize>,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<(), Error> {
    if let Some(t) = cli.threads {
        if t == 0 {
            return Err(Error::InvalidConfig("threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global()
            .map_err(|e| Error::InvalidConfig(e.to_string()))?;
    }
    match cli.command {
        Command::Generate(a) => {
            let spec = BenchmarkSpec::uniform(a.nodes, a.n_macro, a.n_micro, a.mu1, a.mu2, a.avg_degree, a.seed)?;
            let files = mhksc_cli::generate(&spec, &a.out)?;
            println!("{}", files.edges.display());
        }
        Command::Cluster(a) => {
            let config = RunConfig {
                t0: a.t0,
                maxk: a.maxk,
                train_fraction: a.train_fraction,
                valid_fraction: a.valid_fraction,
                cap: a.cap,
                max_cluster: a.max_cluster,
                max_ground: a.max_ground,
                chunk: a.chunk,
                seed: a.seed,
                threads: cli.threads,
                ..RunConfig::new(a.input, a.out)
            };
            let outcome = mhksc_cli::cluster(&config)?;
            for l in &outcome.manifest.levels {
                println!("level {}\tk={}\tt={:.6}", l.level, l.k, l.threshold);
            }
        }
        Command::Evaluate(a) => {
            let report = mhksc_cli::evaluate(&a.tree, &a.graph, &a.truths)?;
            match a.out {
                Some(prefix) => mhksc_cli::save_report(&report, &prefix)?,
                None => print!("{}", report.to_tsv()),
            }
        }
        Command::Export(a) => {
            let format: ExportFormat = a.format.parse()?;
            let text = mhksc_cli::export(&a.tree, format, a.level)?;
            mhksc_cli::emit(a.out.as_deref(), &text)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    // clap exits with status 2 on usage errors, matching configuration errors.
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            ExitCode::from(match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Io => 3,
                ErrorClass::Numerical => 4,
            })
        }
    }
}
