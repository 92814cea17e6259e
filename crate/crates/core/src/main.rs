use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dlstm::harness::{emit_csv, run_experiment, Algorithm, ExperimentConfig};

#[derive(Parser)]
#[command(name = "dlstm", about = "Online distributed training of LSTM regressors", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file and write the metrics CSV.
    Run(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Flat key = value config file.
    #[arg(long)]
    config: PathBuf,
    /// Override the trainer (sgd | ekf | pf | dekf | dpf).
    #[arg(long)]
    algorithm: Option<String>,
    /// Override the experiment seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the node count.
    #[arg(long)]
    nodes: Option<usize>,
    /// Override particles per node.
    #[arg(long)]
    particles: Option<usize>,
    /// Override Markov steps per round.
    #[arg(long)]
    steps: Option<usize>,
    /// Metrics CSV path.
    #[arg(long, default_value = "metrics.csv")]
    out: PathBuf,
}

fn run(args: &RunArgs) -> dlstm::Result<()> {
    let mut cfg = ExperimentConfig::from_file(&args.config)?;
    if let Some(algorithm) = &args.algorithm {
        cfg.algorithm = algorithm.parse::<Algorithm>()?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(nodes) = args.nodes {
        cfg.nodes = nodes;
    }
    if let Some(particles) = args.particles {
        cfg.particles = particles;
    }
    if let Some(steps) = args.steps {
        cfg.steps = steps;
    }
    cfg.validate()?;

    let log = run_experiment(&cfg)?;
    emit_csv(&log, &args.out)?;

    if let Some(t) = log.final_round() {
        let network = log.network_cumulative_mse(t).unwrap_or(f64::NAN);
        println!(
            "{}: {} rounds x {} nodes, final network cumulative MSE {network:.6e}",
            cfg.algorithm, t, cfg.nodes
        );
    } else {
        println!("{}: empty run", cfg.algorithm);
    }
    println!("metrics written to {}", args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Run(args) => match run(args) {
            Ok(()) => ExitCode::SUCCESS,
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::FAILURE
            }
        },
    }
}
