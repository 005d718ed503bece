//! `pmuedge simulate | sweep | report` — scenario runs and report rendering.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use pmuedge_core::knn::{self, KnnConfig};
use pmuedge_core::metrics::{self, ScenarioResult};
use pmuedge_core::netsim::{
    build_scenario, default_pmu_streams, run as run_sim, Detector, DetectorChoice, Scenario,
    ScenarioOverrides, SimOutput, Topology,
};
use pmuedge_core::signalgen::{generate_dataset_with, DatasetConfig, SignalConfig};
use pmuedge_core::ssa::{self, SsaConfig};
use serde::Serialize;

use crate::detect::DEFAULT_SSA_RATIO;
use crate::util::{parse_duration_s, parse_grid, write_atomic};
use crate::manifest;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum QosMode {
    On,
    Off,
    Both,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum DetectorArg {
    Oracle,
    Ssa,
    Knn,
}

impl From<DetectorArg> for DetectorChoice {
    fn from(v: DetectorArg) -> Self {
        match v {
            DetectorArg::Oracle => DetectorChoice::Oracle,
            DetectorArg::Ssa => DetectorChoice::Ssa,
            DetectorArg::Knn => DetectorChoice::Knn,
        }
    }
}

#[derive(Args, Serialize)]
pub struct SimulateArgs {
    /// Scenario id: 1 (10 Mbps), 2 (100 Mbps), 3 (100 Mbps + background).
    #[arg(long)]
    pub scenario: u8,
    #[arg(long, value_enum, default_value_t = QosMode::Both)]
    pub qos: QosMode,
    #[arg(long, value_enum, default_value_t = DetectorArg::Oracle)]
    pub detector: DetectorArg,
    /// Simulated time, seconds.
    #[arg(long, default_value_t = 2.0)]
    pub duration: f64,
    /// Noise level of the per-PMU measurement streams.
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Concentrator timeout for the in-simulation release, e.g. `10ms`.
    #[arg(long, default_value = "10ms")]
    pub tto: String,
    /// Timeout sweep for completeness curves, e.g. `0.5ms..8ms:0.25ms`.
    #[arg(long, default_value = "0.5ms..8ms:0.25ms")]
    pub sweep_tto: String,
    /// SSA decision threshold for fog marking (multiple of the baseline).
    #[arg(long, default_value_t = DEFAULT_SSA_RATIO)]
    pub ssa_ratio: f64,
    /// Scenario overrides file (JSON).
    #[arg(long)]
    pub scenario_file: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Calibration/training material for the fog detectors, derived from the
/// master seed on dedicated substreams.
struct PreparedDetector {
    ssa_config: Option<SsaConfig>,
    knn_model: Option<knn::KnnModel>,
    choice: DetectorChoice,
}

impl PreparedDetector {
    fn prepare(choice: DetectorChoice, duration: f64, noise: f64, seed: u64, ratio: f64) -> Result<Self> {
        let mut prepared = PreparedDetector {
            ssa_config: None,
            knn_model: None,
            choice,
        };
        match choice {
            DetectorChoice::Oracle => {}
            DetectorChoice::Ssa => {
                let calibration = DatasetConfig {
                    n_per_fault: 1,
                    noise_level: noise,
                    seed: seed ^ 0x5541_c01d,
                    base: SignalConfig {
                        duration_s: duration.max(1.0),
                        fault_onset_s: 0.3,
                        fault_duration_s: 0.1,
                        ..SignalConfig::default()
                    },
                    severity_range: (0.9, 1.0),
                };
                let normals: Vec<_> = generate_dataset_with(&calibration)?
                    .into_iter()
                    .filter(|r| r.label_intervals.is_empty())
                    .collect();
                let mut cfg = SsaConfig {
                    threshold_ratio: ratio,
                    ..SsaConfig::default()
                };
                cfg.baseline_distance = Some(ssa::calibrate_baseline(&normals, &cfg)?);
                prepared.ssa_config = Some(cfg);
            }
            DetectorChoice::Knn => {
                let training = DatasetConfig {
                    n_per_fault: 5,
                    noise_level: noise,
                    seed: seed ^ 0x6b6e_6e00,
                    base: SignalConfig::default(),
                    severity_range: (0.9, 1.0),
                };
                let records = generate_dataset_with(&training)?;
                prepared.knn_model = Some(knn::train(&records, &KnnConfig::default())?);
            }
        }
        Ok(prepared)
    }

    fn detector(&self) -> Detector<'_> {
        match self.choice {
            DetectorChoice::Oracle => Detector::Oracle,
            DetectorChoice::Ssa => Detector::Ssa(self.ssa_config.as_ref().expect("prepared")),
            DetectorChoice::Knn => Detector::Knn(self.knn_model.as_ref().expect("prepared")),
        }
    }
}

fn one_run(
    topology: &Topology,
    scenario: &Scenario,
    noise: f64,
    prepared: &PreparedDetector,
) -> Result<(SimOutput, Vec<f64>)> {
    let streams = default_pmu_streams(
        topology.pmu_nodes.len(),
        scenario.duration_s.max(2.0),
        noise,
        scenario.seed,
    )?;
    let output = run_sim(topology, scenario, &streams, &prepared.detector())?;
    Ok((output, Vec::new()))
}

pub fn run_simulate(args: SimulateArgs) -> Result<i32> {
    let options_json = serde_json::to_string(&args)?;
    std::fs::create_dir_all(&args.out)?;
    manifest::write_manifest(
        "simulate",
        args.seed,
        &args.out,
        args.scenario_file.as_deref(),
        &options_json,
    )?;

    let mut overrides: ScenarioOverrides = match &args.scenario_file {
        Some(path) => serde_json::from_str(
            &std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?,
        )?,
        None => ScenarioOverrides::default(),
    };
    overrides.seed = Some(args.seed);
    overrides.duration_s = Some(args.duration);
    overrides.timeout_s = Some(parse_duration_s(&args.tto)?);
    overrides.detector = Some(args.detector.into());
    let grid = parse_grid(&args.sweep_tto)?;

    let prepared = PreparedDetector::prepare(
        args.detector.into(),
        args.duration,
        args.noise,
        args.seed,
        args.ssa_ratio,
    )?;

    let settings: Vec<bool> = match args.qos {
        QosMode::On => vec![true],
        QosMode::Off => vec![false],
        QosMode::Both => vec![false, true],
    };
    let mut results: Vec<ScenarioResult> = Vec::new();
    for qos in settings {
        let mut setting_overrides = overrides.clone();
        setting_overrides.qos_enabled = Some(qos);
        let (topology, scenario) = build_scenario(args.scenario, &setting_overrides)?;
        let (output, _) = one_run(&topology, &scenario, args.noise, &prepared)?;
        let tag = if qos { "qos" } else { "no_qos" };
        write_atomic(
            &args.out.join(format!("event_log_{tag}.csv")),
            output.event_log_csv(&topology).as_bytes(),
        )?;
        results.push(metrics::summarize_run(&scenario, &output, &grid)?);
    }

    write_atomic(
        &args.out.join("results.json"),
        serde_json::to_string_pretty(&results)?.as_bytes(),
    )?;
    let report = metrics::render_report(&results)?;
    metrics::write_report(&report, &args.out)?;
    for line in report.delay_table_csv.lines() {
        println!("{line}");
    }
    if report.properties.all_pass() {
        Ok(0)
    } else {
        eprintln!("acceptance properties failed: {:?}", report.properties);
        Ok(2)
    }
}

#[derive(Args, Serialize)]
pub struct SweepArgs {
    #[arg(long)]
    pub scenario: u8,
    /// Timeout grid, e.g. `2ms..20ms:0.5ms`.
    #[arg(long)]
    pub tto: String,
    #[arg(long, value_enum, default_value_t = DetectorArg::Oracle)]
    pub detector: DetectorArg,
    #[arg(long, default_value_t = 2.0)]
    pub duration: f64,
    #[arg(long, default_value_t = 0.05)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_SSA_RATIO)]
    pub ssa_ratio: f64,
    #[arg(long)]
    pub scenario_file: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_sweep(args: SweepArgs) -> Result<i32> {
    let simulate = SimulateArgs {
        scenario: args.scenario,
        qos: QosMode::Both,
        detector: args.detector,
        duration: args.duration,
        noise: args.noise,
        seed: args.seed,
        tto: "10ms".into(),
        sweep_tto: args.tto,
        ssa_ratio: args.ssa_ratio,
        scenario_file: args.scenario_file,
        out: args.out,
    };
    run_simulate(simulate)
}

#[derive(Args, Serialize)]
pub struct ReportArgs {
    /// One or two results.json files from simulate runs.
    #[arg(long, required = true, num_args = 1..)]
    pub results: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run_report(args: ReportArgs) -> Result<i32> {
    let options_json = serde_json::to_string(&args)?;
    std::fs::create_dir_all(&args.out)?;
    manifest::write_manifest("report", 0, &args.out, None, &options_json)?;
    let mut runs: Vec<ScenarioResult> = Vec::new();
    for path in &args.results {
        let batch: Vec<ScenarioResult> = serde_json::from_str(
            &std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?,
        )?;
        runs.extend(batch);
    }
    if runs.is_empty() {
        bail!("no scenario results found");
    }
    let report = metrics::render_report(&runs)?;
    metrics::write_report(&report, &args.out)?;
    if report.properties.all_pass() {
        Ok(0)
    } else {
        Ok(2)
    }
}
