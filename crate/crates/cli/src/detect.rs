//! `pmuedge detect` — run the SSA or KNN detector over records.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand};
use pmuedge_core::eval::ClassAccuracy;
use pmuedge_core::knn::{self, KnnConfig, KnnModel};
use pmuedge_core::rng::substream;
use pmuedge_core::signalgen::{downsample, FaultType, WaveformRecord};
use pmuedge_core::ssa::{self, DetectionRun, RocPoint, SsaConfig};
use rand::seq::SliceRandom;
use serde::Serialize;

use crate::util::write_atomic;
use crate::{dataset, manifest};

#[derive(Subcommand)]
pub enum DetectCommand {
    /// Subspace-distance change-point detection.
    Ssa(SsaArgs),
    /// Window-feature nearest-neighbor classification.
    Knn(KnnArgs),
}

#[derive(Args, Serialize)]
pub struct SsaArgs {
    /// Labeled dataset directory to evaluate.
    #[arg(long, conflicts_with = "input")]
    pub dataset: Option<PathBuf>,
    /// Single record CSV to score.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Detection config JSON (keys n, m, p, q, l, threshold_ratio).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Decision threshold as a multiple of the calibrated baseline.
    /// Overrides the config value.
    #[arg(long)]
    pub ratio: Option<f64>,
    /// Calibrate the baseline from the normal records of this dataset
    /// (single-input mode; dataset mode calibrates on its own normals).
    #[arg(long)]
    pub calibrate: Option<PathBuf>,
    /// Explicit baseline distance (alternative to --calibrate).
    #[arg(long)]
    pub baseline: Option<f64>,
    /// Keep every n-th sample before detection.
    #[arg(long, default_value_t = 1)]
    pub downsample: usize,
    /// Also sweep the threshold over a log grid and write ROC points.
    #[arg(long, default_value_t = false)]
    pub roc: bool,
    /// Also write per-record detection CSVs in dataset mode.
    #[arg(long, default_value_t = false)]
    pub per_record: bool,
    /// False-alarm guard band after each fault interval, in samples.
    #[arg(long, default_value_t = 48)]
    pub guard_samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Default CLI decision threshold: multiples of the calibrated baseline at
/// which the subspace distance separates faults from ambient noise on
/// synthetic waveform records.
pub const DEFAULT_SSA_RATIO: f64 = 2.7;

#[derive(Serialize)]
struct DetectionReport {
    threshold_ratio: f64,
    baseline_distance: f64,
    guard_s: f64,
    mean_window_cost_s: f64,
    per_class: BTreeMap<String, ClassAccuracy>,
}

fn load_ssa_config(args: &SsaArgs) -> Result<SsaConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        }
        None => SsaConfig {
            threshold_ratio: DEFAULT_SSA_RATIO,
            ..SsaConfig::default()
        },
    };
    if let Some(ratio) = args.ratio {
        cfg.threshold_ratio = ratio;
    }
    Ok(cfg)
}

fn detection_csv(series: &ssa::DetectionSeries) -> String {
    let mut out = String::from("t,distance,flag\n");
    for p in &series.points {
        out.push_str(&format!("{},{},{}\n", p.time_s, p.distance, p.is_anomaly as u8));
    }
    out
}

fn run_ssa(args: SsaArgs) -> Result<i32> {
    let options_json = serde_json::to_string(&args)?;
    std::fs::create_dir_all(&args.out)?;
    manifest::write_manifest(
        "detect-ssa",
        args.seed,
        &args.out,
        args.config.as_deref(),
        &options_json,
    )?;
    let mut cfg = load_ssa_config(&args)?;
    if args.downsample == 0 {
        bail!("--downsample must be >= 1");
    }

    if let Some(input) = &args.input {
        // single-record scoring
        let text = std::fs::read_to_string(input)?;
        let mut record = WaveformRecord::from_csv(&text)?;
        if args.downsample > 1 {
            record = downsample(&record, args.downsample)?;
        }
        if cfg.baseline_distance.is_none() {
            cfg.baseline_distance = match (&args.baseline, &args.calibrate) {
                (Some(b), _) => Some(*b),
                (None, Some(dir)) => {
                    let normals = load_normals(dir, args.downsample)?;
                    Some(ssa::calibrate_baseline(&normals, &cfg)?)
                }
                (None, None) => bail!(
                    "single-input mode needs a baseline: pass --baseline, --calibrate, or a config with baseline_distance"
                ),
            };
        }
        let series = ssa::detect(&record, &cfg)?;
        write_atomic(&args.out.join("detection.csv"), detection_csv(&series).as_bytes())?;
        eprintln!(
            "scored {} windows, {:.1} us per window",
            series.points.len(),
            series.mean_window_cost_s * 1e6
        );
        return Ok(0);
    }

    let Some(dir) = &args.dataset else {
        bail!("pass either --dataset or --input");
    };
    let named = dataset::load(dir)?;
    let mut records: Vec<(String, WaveformRecord)> = Vec::with_capacity(named.len());
    for (name, record) in named {
        let record = if args.downsample > 1 {
            downsample(&record, args.downsample)?
        } else {
            record
        };
        records.push((name, record));
    }
    let normals: Vec<WaveformRecord> = records
        .iter()
        .filter(|(_, r)| r.fault_kind() == FaultType::None)
        .map(|(_, r)| r.clone())
        .collect();
    if normals.is_empty() {
        bail!("dataset has no normal records for calibration");
    }
    cfg.baseline_distance = Some(ssa::calibrate_baseline(&normals, &cfg)?);

    let mut runs: Vec<DetectionRun> = Vec::with_capacity(records.len());
    let mut cost_sum = 0.0;
    for (name, record) in &records {
        let series = ssa::detect(record, &cfg)?;
        cost_sum += series.mean_window_cost_s;
        if args.per_record {
            write_atomic(
                &args.out.join(format!("detections/{name}.csv")),
                detection_csv(&series).as_bytes(),
            )?;
        }
        runs.push((record.fault_kind(), record.label_intervals.clone(), series));
    }
    let sample_rate = records[0].1.sample_rate_hz();
    let guard_s = args.guard_samples as f64 / sample_rate;
    let per_class = ssa::evaluate_at(&runs, cfg.threshold_ratio, guard_s);
    let report = DetectionReport {
        threshold_ratio: cfg.threshold_ratio,
        baseline_distance: cfg.baseline_distance.unwrap(),
        guard_s,
        mean_window_cost_s: cost_sum / runs.len() as f64,
        per_class: per_class
            .iter()
            .map(|(f, a)| (f.short_name().to_string(), *a))
            .collect(),
    };
    write_atomic(
        &args.out.join("report.json"),
        serde_json::to_string_pretty(&report)?.as_bytes(),
    )?;

    if args.roc {
        let ratios = ssa::log_grid(0.5, 1e7, 60);
        let roc = ssa::roc_sweep(&runs, &ratios, guard_s);
        let mut csv = String::from("threshold_ratio,tpr,fpr\n");
        for RocPoint {
            threshold_ratio,
            tpr,
            fpr,
        } in &roc
        {
            csv.push_str(&format!("{threshold_ratio},{tpr},{fpr}\n"));
        }
        write_atomic(&args.out.join("roc.csv"), csv.as_bytes())?;
    }
    for (fault, acc) in &per_class {
        println!(
            "{:>6}: tpr {} fpr {:.4} over {} records",
            fault.short_name(),
            acc.tpr.map(|t| format!("{t:.4}")).unwrap_or_else(|| "n/a".into()),
            acc.fpr,
            acc.records
        );
    }
    Ok(0)
}

fn load_normals(dir: &PathBuf, ds_factor: usize) -> Result<Vec<WaveformRecord>> {
    let named = dataset::load(dir)?;
    let mut normals = Vec::new();
    for (_, record) in named {
        if record.fault_kind() == FaultType::None {
            normals.push(if ds_factor > 1 {
                downsample(&record, ds_factor)?
            } else {
                record
            });
        }
    }
    if normals.is_empty() {
        bail!("no normal records in {}", dir.display());
    }
    Ok(normals)
}

#[derive(Args, Serialize)]
pub struct KnnArgs {
    /// Dataset directory supplying training records.
    #[arg(long)]
    pub train: PathBuf,
    /// Dataset directory to evaluate (training records are excluded when it
    /// is the same directory).
    #[arg(long)]
    pub input: PathBuf,
    /// Voting neighbors.
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Comma-separated 1-based feature indices.
    #[arg(long, default_value = "6,8,9,10", value_delimiter = ',')]
    pub features: Vec<usize>,
    /// Window length in samples.
    #[arg(long, default_value_t = 10)]
    pub window: usize,
    /// Training records drawn per class.
    #[arg(long, default_value_t = 5)]
    pub train_per_class: usize,
    /// Sweep training-set sizes, e.g. `1..7`.
    #[arg(long)]
    pub sweep_training: Option<String>,
    /// Reuse a previously trained model instead of training.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

/// Seeded per-class split: the first `per_class` shuffled records of each
/// class train, the rest are left for evaluation.
fn split_training(
    named: &[(String, WaveformRecord)],
    per_class: usize,
    seed: u64,
) -> (Vec<String>, Vec<WaveformRecord>) {
    let mut rng = substream(seed, "cli/knn/split");
    let mut train_names = Vec::new();
    let mut train_records = Vec::new();
    let mut classes: Vec<FaultType> = vec![FaultType::None];
    classes.extend(FaultType::FAULTS);
    for class in classes {
        let mut members: Vec<&(String, WaveformRecord)> = named
            .iter()
            .filter(|(_, r)| r.fault_kind() == class)
            .collect();
        members.shuffle(&mut rng);
        for (name, record) in members.into_iter().take(per_class) {
            train_names.push(name.clone());
            train_records.push(record.clone());
        }
    }
    (train_names, train_records)
}

fn evaluate_excluding(
    model: &KnnModel,
    named: &[(String, WaveformRecord)],
    exclude: &[String],
) -> Result<BTreeMap<FaultType, ClassAccuracy>> {
    let test: Vec<WaveformRecord> = named
        .iter()
        .filter(|(name, _)| !exclude.contains(name))
        .map(|(_, r)| r.clone())
        .collect();
    Ok(knn::evaluate(model, &test)?)
}

fn run_knn(args: KnnArgs) -> Result<i32> {
    let options_json = serde_json::to_string(&args)?;
    std::fs::create_dir_all(&args.out)?;
    manifest::write_manifest("detect-knn", args.seed, &args.out, None, &options_json)?;

    let config = KnnConfig {
        neighbors: args.k,
        window_len: args.window,
        selected_features: args.features.clone(),
        standardize: true,
    };
    config.validate()?;
    let train_named = dataset::load(&args.train)?;
    let input_named = if args.input == args.train {
        train_named.clone()
    } else {
        dataset::load(&args.input)?
    };

    if let Some(sweep) = &args.sweep_training {
        let (lo, hi) = sweep
            .split_once("..")
            .with_context(|| format!("--sweep-training wants lo..hi, got {sweep:?}"))?;
        let lo: usize = lo.parse()?;
        let hi: usize = hi.parse()?;
        if lo == 0 || hi < lo {
            bail!("bad sweep range {sweep:?}");
        }
        let mut csv = String::from("train_per_class,tpr,fpr\n");
        for size in lo..=hi {
            let (train_names, train_records) = split_training(&train_named, size, args.seed);
            let model = knn::train(&train_records, &config)?;
            let report = evaluate_excluding(&model, &input_named, &train_names)?;
            let (mut tp, mut fault_records, mut fp, mut all_records) = (0, 0, 0, 0);
            for (fault, acc) in &report {
                all_records += acc.records;
                fp += acc.false_positives;
                if *fault != FaultType::None {
                    fault_records += acc.records;
                    tp += acc.true_positives;
                }
            }
            csv.push_str(&format!(
                "{size},{},{}\n",
                tp as f64 / fault_records.max(1) as f64,
                fp as f64 / all_records.max(1) as f64
            ));
        }
        write_atomic(&args.out.join("training_sweep.csv"), csv.as_bytes())?;
    }

    let (model, train_names) = match &args.model {
        Some(path) => {
            let model = KnnModel::from_json(&std::fs::read_to_string(path)?)?;
            (model, Vec::new())
        }
        None => {
            let (train_names, train_records) =
                split_training(&train_named, args.train_per_class, args.seed);
            let model = knn::train(&train_records, &config)?;
            write_atomic(&args.out.join("model.json"), model.to_json().as_bytes())?;
            (model, train_names)
        }
    };
    let report = evaluate_excluding(&model, &input_named, &train_names)?;
    let by_name: BTreeMap<String, ClassAccuracy> = report
        .iter()
        .map(|(f, a)| (f.short_name().to_string(), *a))
        .collect();
    write_atomic(
        &args.out.join("report.json"),
        serde_json::to_string_pretty(&by_name)?.as_bytes(),
    )?;
    for (fault, acc) in &report {
        println!(
            "{:>6}: tpr {} fpr {:.4} over {} records",
            fault.short_name(),
            acc.tpr.map(|t| format!("{t:.4}")).unwrap_or_else(|| "n/a".into()),
            acc.fpr,
            acc.records
        );
    }
    Ok(0)
}

pub fn run(command: DetectCommand) -> Result<i32> {
    match command {
        DetectCommand::Ssa(args) => run_ssa(args),
        DetectCommand::Knn(args) => run_knn(args),
    }
}
