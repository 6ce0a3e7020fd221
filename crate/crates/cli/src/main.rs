use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser};
use ddbh_cli::{run, Command, Options};

/// Driven-dissipative Bose-Hubbard lattices: truncated-Wigner ensembles,
/// mean-field branches, exact small-system benchmarks and gap fits.
#[derive(Parser)]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(clap::Subcommand)]
enum Sub {
    /// Homogeneous mean-field branches and spinodals.
    Meanfield(RunArgs),
    /// Steady-state population, g2 and f0 versus drive.
    Sweep(RunArgs),
    /// Relaxation rate versus drive and the finite-size power law.
    Gap(RunArgs),
    /// Truncated-Wigner versus exact steady state on small systems.
    Benchmark(RunArgs),
    /// Long-time distribution of the site-averaged population.
    Histogram(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    config: PathBuf,
    /// Overrides `engine.seed`.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "results")]
    out_dir: PathBuf,
    /// Worker threads (results do not depend on it).
    #[arg(long)]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    let (command, args) = match cli.command {
        Sub::Meanfield(a) => (Command::Meanfield, a),
        Sub::Sweep(a) => (Command::Sweep, a),
        Sub::Gap(a) => (Command::Gap, a),
        Sub::Benchmark(a) => (Command::Benchmark, a),
        Sub::Histogram(a) => (Command::Histogram, a),
    };
    let opts = Options { config: args.config, seed: args.seed, out_dir: args.out_dir, threads: args.threads };
    match run(command, &opts) {
        Ok(m) => {
            println!("{}: wrote {} file(s) to {}", command.name(), m.outputs.len(), opts.out_dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
