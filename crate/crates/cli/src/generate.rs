//! `pmuedge generate` — write a labeled synthetic dataset.

use std::path::PathBuf;

use anyhow::Result;
use clap::Args;
use pmuedge_core::signalgen::{generate_dataset_with, DatasetConfig, SignalConfig};
use serde::Serialize;

use crate::{dataset, manifest};

#[derive(Args, Serialize)]
pub struct GenerateArgs {
    /// Records per fault type (the same count of normal records is added).
    #[arg(long, default_value_t = 30)]
    pub per_fault: usize,
    /// Ambient noise level as a fraction of nominal amplitude.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
    /// Record duration, seconds.
    #[arg(long, default_value_t = 2.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 600.0)]
    pub sample_rate: f64,
    /// Fault severity range sampled per record.
    #[arg(long, default_value_t = 0.9)]
    pub severity_min: f64,
    #[arg(long, default_value_t = 1.0)]
    pub severity_max: f64,
}

pub fn run(args: GenerateArgs) -> Result<i32> {
    let options_json = serde_json::to_string(&args)?;
    std::fs::create_dir_all(&args.out)?;
    manifest::write_manifest("generate", args.seed, &args.out, None, &options_json)?;

    let config = DatasetConfig {
        n_per_fault: args.per_fault,
        noise_level: args.noise,
        seed: args.seed,
        base: SignalConfig {
            duration_s: args.duration,
            sample_rate_hz: args.sample_rate,
            ..SignalConfig::default()
        },
        severity_range: (args.severity_min, args.severity_max),
    };
    let records = generate_dataset_with(&config)?;
    let mut counters: std::collections::BTreeMap<&'static str, usize> = Default::default();
    let named: Vec<(String, _)> = records
        .into_iter()
        .map(|record| {
            let class = record.fault_kind().short_name();
            let idx = counters.entry(class).or_insert(0);
            let name = format!("{class}_{idx:03}");
            *idx += 1;
            (name, record)
        })
        .collect();
    dataset::save(&args.out, &named)?;
    println!(
        "wrote {} records ({} per class) to {}",
        named.len(),
        args.per_fault,
        args.out.display()
    );
    Ok(0)
}
