//! `pmuedge` — synthetic PMU records, edge anomaly detection, and a
//! QoS-aware network simulation, wired into reproducible pipelines.
//!
//! Every run writes a manifest (seed, tool version, config hash) into its
//! output directory before any other file, so results can be reproduced
//! from the manifest alone.

mod dataset;
mod detect;
mod generate;
mod manifest;
mod simulate;
mod util;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "pmuedge", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled dataset of synthetic PMU voltage records.
    Generate(generate::GenerateArgs),
    /// Run a detector over records or a dataset.
    #[command(subcommand)]
    Detect(detect::DetectCommand),
    /// Simulate the PMU communication network for one scenario.
    Simulate(simulate::SimulateArgs),
    /// Sweep concentrator timeouts for completeness curves (QoS on and off).
    Sweep(simulate::SweepArgs),
    /// Re-render report tables from stored scenario results.
    Report(simulate::ReportArgs),
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(args) => generate::run(args),
        Command::Detect(args) => detect::run(args),
        Command::Simulate(args) => simulate::run_simulate(args),
        Command::Sweep(args) => simulate::run_sweep(args),
        Command::Report(args) => simulate::run_report(args),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}
