use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use selfnorm::harness::{run_experiment_with_workers, ExperimentConfig, ExperimentKind, WORKERS_ENV};
use std::path::PathBuf;
use std::process::ExitCode;

/// Simulate heavy-tailed series and check self-normalized statistics against their limits.
#[derive(Parser)]
#[command(name = "selfnorm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate paths and summarise the self-normalized statistics.
    Simulate(RunArgs),
    /// Sample the limit law from its series representation and check it.
    Limit(RunArgs),
    /// Evaluate limit transforms on a grid.
    Transform(RunArgs),
    /// Compare Monte Carlo means with the closed-form oracles.
    Verify(RunArgs),
    /// Coupling and anti-clustering decay diagnostics.
    Diagnose(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, env = WORKERS_ENV)]
    workers: Option<usize>,
    /// Output root; results go to `<out>/<name>/`.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn run(cli: Cli) -> Result<bool> {
    let (kind, args) = match cli.command {
        Command::Simulate(a) => (ExperimentKind::Simulate, a),
        Command::Limit(a) => (ExperimentKind::Limit, a),
        Command::Transform(a) => (ExperimentKind::Transform, a),
        Command::Verify(a) => (ExperimentKind::Verify, a),
        Command::Diagnose(a) => (ExperimentKind::Diagnose, a),
    };
    let mut cfg = ExperimentConfig::load(&args.config).with_context(|| format!("reading {}", args.config.display()))?;
    if cfg.kind != kind {
        bail!("{} declares kind = \"{}\", not \"{}\"", args.config.display(), cfg.kind.as_str(), kind.as_str());
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = args.out {
        cfg.output.dir = o;
    }
    let report = run_experiment_with_workers(&cfg, args.workers)?;
    print!("{report}");
    println!("wrote {}", cfg.output.dir.join(&cfg.name).display());
    Ok(report.all_pass())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
