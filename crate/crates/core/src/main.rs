//! `starmec run|oracle|curve <config>`: Monte-Carlo experiments.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use starmec::experiment::{curve, oracle, run, with_jobs, ExperimentConfig, Table};

#[derive(Parser)]
#[command(name = "starmec", version, about = "STAR-RIS wireless-powered edge computing experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize every (sweep value, seed, protocol) cell.
    Run(Common),
    /// Compare the optimizer with exhaustive search on small instances.
    Oracle(Common),
    /// Objective against the charging time.
    Curve(Common),
}

#[derive(Args)]
struct Common {
    /// Experiment configuration (TOML).
    config: PathBuf,
    /// Added to every configured seed.
    #[arg(long, default_value_t = 0)]
    seed_offset: u64,
    /// Worker threads; all cores by default.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output CSV, overriding the configured path; `-` for stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, job): (&Common, fn(&ExperimentConfig) -> starmec::Result<Table>) = match &cli.command {
        Command::Run(c) => (c, run),
        Command::Oracle(c) => (c, oracle),
        Command::Curve(c) => (c, curve),
    };
    match execute(common, job) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("starmec: {e}");
            ExitCode::FAILURE
        }
    }
}

fn execute(c: &Common, job: fn(&ExperimentConfig) -> starmec::Result<Table>) -> starmec::Result<()> {
    let mut cfg = ExperimentConfig::from_path(&c.config)?;
    cfg.offset_seeds(c.seed_offset);
    let out = match &c.out {
        Some(p) if p.as_os_str() == "-" => None,
        Some(p) => Some(p.clone()),
        None => cfg.output.clone(),
    };
    let table = with_jobs(c.jobs, || job(&cfg))??;
    table.save(out.as_deref())
}
