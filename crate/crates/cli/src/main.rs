mod config;
mod fit;
mod simulate;
mod summarize;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "phylnet", version, about = "Phylogenetic latent space models for collections of networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; created when missing.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate networks and write them with their ground truth.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, env = "PHYLNET_SEED")]
        seed: Option<u64>,
    },
    /// Run the sampler on adjacency CSV files.
    Fit {
        #[command(flatten)]
        common: Common,
        #[arg(long, env = "PHYLNET_SEED")]
        seed: Option<u64>,
        /// Chains run at the same time; defaults to one per core.
        #[arg(long, env = "PHYLNET_JOBS")]
        jobs: Option<usize>,
        /// Keep latent feature snapshots in the sample logs.
        #[arg(long)]
        store_z: bool,
        /// CSV files or directories of them.
        data: Vec<PathBuf>,
    },
    /// Consensus tree, DensiTree export and parameter report from sample logs.
    Summarize {
        #[command(flatten)]
        common: Common,
        /// Consensus support threshold in [0.5, 1).
        #[arg(long, value_name = "P")]
        threshold: Option<f64>,
        /// Level of the credible set around the truth tree.
        #[arg(long, value_name = "L")]
        level: Option<f64>,
        /// Truth tree in Newick.
        #[arg(long, value_name = "PATH")]
        truth: Option<PathBuf>,
        /// Sample logs or directories of them.
        logs: Vec<PathBuf>,
    },
    /// Normalized Robinson–Foulds distance between two Newick trees.
    Dist {
        a: PathBuf,
        b: PathBuf,
        /// Print the raw split count instead.
        #[arg(long)]
        raw: bool,
    },
}

fn out_dir(cli: Option<PathBuf>, config: &RunConfig) -> Result<PathBuf> {
    let dir = cli.or_else(|| config.out.clone()).unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    Ok(dir)
}

/// File name only, so reports do not depend on where a run happened.
pub fn file_name(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

pub fn read_newick_file(path: &Path, expected: Option<&[String]>) -> Result<phylnet::PhyloTree> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let line = text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#'));
    let line = line.with_context(|| format!("{}: no tree found", path.display()))?;
    phylnet::from_newick(line, expected).with_context(|| format!("{}", path.display()))
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate { common, seed } => {
            let config = RunConfig::load(common.config.as_deref())?.finish(seed)?;
            let out = out_dir(common.out, &config)?;
            simulate::run(&config, &out)
        }
        Command::Fit { common, seed, jobs, store_z, data } => {
            let mut config = RunConfig::load(common.config.as_deref())?.finish(seed)?;
            config.sampler.store_z |= store_z;
            if !data.is_empty() {
                config.data = data;
            }
            let out = out_dir(common.out, &config)?;
            fit::run(&config, jobs, &out)
        }
        Command::Summarize { common, threshold, level, truth, logs } => {
            let mut config = RunConfig::load(common.config.as_deref())?;
            if let Some(p) = threshold {
                config.summary.threshold = p;
            }
            if let Some(l) = level {
                config.summary.level = l;
            }
            if truth.is_some() {
                config.truth = truth;
            }
            if !logs.is_empty() {
                config.logs = logs;
            }
            let config = config.finish(None)?;
            let out = out_dir(common.out, &config)?;
            summarize::run(&config, &out)
        }
        Command::Dist { a, b, raw } => {
            let ta = read_newick_file(&a, None)?;
            let tb = read_newick_file(&b, None)?;
            let d = phylnet::rf_distance(&ta, &tb, !raw)?;
            println!("{d}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
