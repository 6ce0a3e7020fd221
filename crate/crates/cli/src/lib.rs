//! Batch front end: each subcommand reads a TOML run configuration, writes
//! CSV/JSON tables to an output directory and finishes with a manifest that
//! hashes every file it produced.

use std::path::PathBuf;

use ddbh::config::RunConfig;
use ddbh::Execution;

pub mod commands;
pub mod error;
pub mod output;

pub use error::{CliError, CliResult};
pub use output::{verify_manifest, RunManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Meanfield,
    Sweep,
    Gap,
    Benchmark,
    Histogram,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Meanfield => "meanfield",
            Command::Sweep => "sweep",
            Command::Gap => "gap",
            Command::Benchmark => "benchmark",
            Command::Histogram => "histogram",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Options {
    pub config: PathBuf,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    /// Worker threads; affects wall time only.
    pub threads: Option<usize>,
}

pub fn load_config(opts: &Options) -> CliResult<RunConfig> {
    let mut cfg = RunConfig::from_path(&opts.config)?;
    if let Some(seed) = opts.seed {
        cfg.engine.seed = seed;
    }
    Ok(cfg)
}

/// Runs one subcommand. Per-point failures still produce all other outputs
/// and the manifest before the numerical error is returned.
pub fn run(command: Command, opts: &Options) -> CliResult<RunManifest> {
    let cfg = load_config(opts)?;
    match opts.threads {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| CliError::Usage(format!("--threads {n}: {e}")))?;
            pool.install(|| execute(command, cfg, opts))
        }
        None => execute(command, cfg, opts),
    }
}

fn execute(command: Command, cfg: RunConfig, opts: &Options) -> CliResult<RunManifest> {
    let out = output::OutputDir::create(&opts.out_dir)?;
    let mut ctx = commands::Context { cfg, exec: Execution::default(), out, failures: Vec::new() };
    match command {
        Command::Meanfield => commands::meanfield::run(&mut ctx)?,
        Command::Sweep => commands::sweep::run(&mut ctx)?,
        Command::Gap => commands::gap::run(&mut ctx)?,
        Command::Benchmark => commands::benchmark::run(&mut ctx)?,
        Command::Histogram => commands::histogram::run(&mut ctx)?,
    }
    let snapshot = ctx.cfg.to_toml();
    let seed = ctx.cfg.engine.seed;
    let failures = ctx.failures;
    let manifest = ctx.out.finish(command.name(), &snapshot, seed, failures.clone())?;
    if failures.is_empty() {
        Ok(manifest)
    } else {
        Err(CliError::Numerical(format!(
            "{} point(s) failed, partial results in {}:\n  {}",
            failures.len(),
            opts.out_dir.display(),
            failures.join("\n  ")
        )))
    }
}
