mod commands;
mod config;

use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use crate::config::RunConfig;

#[derive(Parser, Debug)]
#[command(name = "dprl", version, about = "Decision-point offline RL experiments")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Override the number of seeds in the configuration.
    #[arg(long, global = true)]
    seeds: Option<usize>,

    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "DPRL_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one dataset per seed.
    Generate,
    /// Train one configured algorithm on a dataset file.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        /// Algorithm label or zero-based index into the configured list.
        #[arg(long)]
        algorithm: String,
    },
    /// Evaluate a policy file exactly (and by rollouts) on the true MDP.
    Evaluate {
        #[arg(long)]
        policy: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        rollouts: usize,
    },
    /// Bound comparison table on forest MDPs.
    Bounds,
    /// Reliability experiment over all seeds and algorithms.
    Sweep,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build_global().context("configuring worker pool")?;
    }
    let path = cli.config.as_ref().context("--config PATH is required")?;
    let mut config = RunConfig::load(path)?;
    if let Some(seeds) = cli.seeds {
        config.experiment.num_seeds = seeds;
    }
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating output directory {}", cli.out.display()))?;
    match &cli.command {
        Command::Generate => commands::generate(&config, &cli.out),
        Command::Train { dataset, algorithm } => commands::train(&config, dataset, algorithm, &cli.out),
        Command::Evaluate { policy, rollouts } => commands::evaluate(&config, policy, *rollouts, &cli.out),
        Command::Bounds => commands::bounds(&config, &cli.out),
        Command::Sweep => commands::sweep(&config, &cli.out),
    }
}
