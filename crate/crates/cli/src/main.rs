//! `latqueue`: run scenarios, bound checks, property suites, stability sweeps
//! and exact solves from a JSON config.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod record;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};

use commands::{Ctx, Outcome};
use config::Overrides;

#[derive(Parser)]
#[command(name = "latqueue", version, about = "Interference-coupled queues on lattices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate replications; writes a JSONL run record and a CSV trace.
    Simulate(Common),
    /// Evaluate the configured moment bounds; writes a CSV table.
    Bounds(Common),
    /// Run the configured property suites.
    Verify(Common),
    /// Classify stability over the configured arrival rates.
    Sweep(Common),
    /// Solve the truncated chain for its stationary law.
    Exact(Common),
}

#[derive(Args)]
struct Common {
    /// Scenario config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Master seed, replacing `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for replications.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, env = "LATQUEUE_OUT", default_value = "latqueue-out")]
    out: PathBuf,
    /// Trace every K slots (or time units), replacing `run.trace_stride`.
    #[arg(long)]
    trace_stride: Option<u64>,
}

fn run(cli: Cli) -> Result<Outcome> {
    let (name, common, f): (_, _, fn(&Ctx) -> Result<Outcome>) = match cli.command {
        Command::Simulate(c) => ("simulate", c, commands::simulate),
        Command::Bounds(c) => ("bounds", c, commands::bounds),
        Command::Verify(c) => ("verify", c, commands::verify),
        Command::Sweep(c) => ("sweep", c, commands::sweep),
        Command::Exact(c) => ("exact", c, commands::exact),
    };
    if let Some(jobs) = common.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    let overrides = Overrides {
        seed: common.seed,
        trace_stride: common.trace_stride,
    };
    let loaded = config::load(&common.config, overrides)?;
    f(&Ctx {
        loaded,
        out: common.out,
        command: name,
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Violation) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
