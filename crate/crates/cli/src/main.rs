//! `otfs`: Wasserstein distances and Sinkhorn divergences from the
//! command line.
//!
//! Subcommands: `distance` (one pair of measures, JSON/CSV report),
//! `sweep-lambda` (divergence bounds across regularization strengths,
//! CSV), `bench` (timing/memory scaling on synthetic instances, CSV) and
//! `selftest` (desk-scale oracle suites).
//!
//! Exit codes: 0 success, 2 numerical failure (underflow or non-positive
//! denominator), 3 I/O or validation error.
//!
//! Every flag can also come from the environment with the `OTFS_` prefix
//! (e.g. `OTFS_LAMBDA=20`); explicit flags win over the environment,
//! which wins over defaults.

mod bench;
mod distance;
mod report;
mod selftest;
mod sweep;
mod synth;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use std::process::ExitCode;

#[derive(Debug, Parser)]
#[command(name = "otfs", version, about)]
struct Cli {
    /// Worker threads for the parallel kernels (0 = all logical cores).
    #[arg(long, global = true, env = "OTFS_THREADS", default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute one distance/divergence between two measures.
    Distance(distance::DistanceArgs),
    /// Lower/upper divergence across a list of lambdas, as CSV.
    #[command(name = "sweep-lambda")]
    SweepLambda(sweep::SweepArgs),
    /// Timing and memory scaling on synthetic instances, as CSV.
    Bench(bench::BenchArgs),
    /// Run the desk-scale oracle suites and report pass/fail.
    Selftest(selftest::SelftestArgs),
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e)
            if matches!(
                e.kind(),
                ErrorKind::DisplayHelp
                    | ErrorKind::DisplayVersion
                    | ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand
            ) =>
        {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(3);
        }
    };

    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("error: could not configure {} threads: {e}", cli.threads);
            return ExitCode::from(3);
        }
    }

    let outcome = match cli.command {
        Command::Distance(args) => distance::run(&args),
        Command::SweepLambda(args) => sweep::run(&args),
        Command::Bench(args) => bench::run(&args),
        Command::Selftest(args) => selftest::run(&args),
    };

    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(2)
            } else {
                ExitCode::from(3)
            }
        }
    }
}
