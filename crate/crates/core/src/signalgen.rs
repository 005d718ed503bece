//! Synthetic PMU voltage records with labeled fault intervals.
//!
//! Records are an instantaneous nominal sinusoid multiplied by a per-fault
//! amplitude envelope, plus white Gaussian ambient noise. Five fault
//! signatures are modeled: four voltage sags of differing depth (line-to-line,
//! line-to-ground, double-line-to-ground, three-phase) and a generator trip
//! (dip followed by a reduced post-event plateau with a slow damped ring).
//! All randomness flows from the record seed through named substreams, so a
//! record is a pure function of its configuration.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::substream;

/// Fault categories carried by label intervals. `None` marks a normal record
/// and never appears inside a label interval.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum FaultType {
    None,
    GeneratorTrip,
    LineToLine,
    LineToGround,
    LineToLineToGround,
    ThreePhase,
}

impl FaultType {
    /// The five fault categories, in dataset order.
    pub const FAULTS: [FaultType; 5] = [
        FaultType::GeneratorTrip,
        FaultType::LineToLine,
        FaultType::LineToGround,
        FaultType::LineToLineToGround,
        FaultType::ThreePhase,
    ];

    pub fn short_name(self) -> &'static str {
        match self {
            FaultType::None => "normal",
            FaultType::GeneratorTrip => "gt",
            FaultType::LineToLine => "ll",
            FaultType::LineToGround => "lg",
            FaultType::LineToLineToGround => "llg",
            FaultType::ThreePhase => "3ph",
        }
    }
}

/// Envelope of a voltage sag: amplitude drops to `residual_pu` for the fault
/// interval, then ramps back to nominal over `recovery_cycles` cycles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SagParams {
    pub residual_pu: f64,
    pub recovery_cycles: f64,
}

/// Envelope of a generator trip: a dip to `dip_residual_pu` during the event,
/// recovery onto a reduced `step_pu` plateau, and a damped amplitude ring at
/// `ring_hz` on that plateau.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TripParams {
    pub step_pu: f64,
    pub dip_residual_pu: f64,
    pub ring_hz: f64,
    pub ring_amplitude_pu: f64,
    pub decay_s: f64,
    pub recovery_cycles: f64,
}

/// Per-fault-type amplitude distortion envelopes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaultParams {
    pub line_to_line: SagParams,
    pub line_to_ground: SagParams,
    pub line_to_line_to_ground: SagParams,
    pub three_phase: SagParams,
    pub generator_trip: TripParams,
}

impl Default for FaultParams {
    fn default() -> Self {
        FaultParams {
            line_to_line: SagParams {
                residual_pu: 0.6,
                recovery_cycles: 1.0,
            },
            line_to_ground: SagParams {
                residual_pu: 0.7,
                recovery_cycles: 1.0,
            },
            line_to_line_to_ground: SagParams {
                residual_pu: 0.5,
                recovery_cycles: 1.0,
            },
            three_phase: SagParams {
                residual_pu: 0.3,
                recovery_cycles: 1.0,
            },
            generator_trip: TripParams {
                step_pu: 0.95,
                dip_residual_pu: 0.65,
                ring_hz: 1.0,
                ring_amplitude_pu: 0.03,
                decay_s: 0.5,
                recovery_cycles: 1.0,
            },
        }
    }
}

/// Configuration of one synthetic record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalConfig {
    pub sample_rate_hz: f64,
    pub duration_s: f64,
    pub fault_onset_s: f64,
    pub fault_duration_s: f64,
    /// Ambient noise standard deviation as a fraction of nominal amplitude.
    pub noise_level: f64,
    pub nominal_freq_hz: f64,
    pub nominal_amplitude: f64,
    /// Fault severity in [0, 1]; 1 applies the configured envelope in full,
    /// smaller values interpolate toward the nominal amplitude. Stands in
    /// for the electrical distance between the fault location and the PMU.
    pub severity: f64,
    pub fault_params: FaultParams,
    pub rng_seed: u64,
}

impl Default for SignalConfig {
    fn default() -> Self {
        SignalConfig {
            sample_rate_hz: 600.0,
            duration_s: 2.0,
            fault_onset_s: 0.5,
            fault_duration_s: 0.1,
            noise_level: 0.05,
            nominal_freq_hz: 60.0,
            nominal_amplitude: 1.0,
            severity: 1.0,
            fault_params: FaultParams::default(),
            rng_seed: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("downsample factor must be >= 1")]
    ZeroFactor,
    #[error("malformed record CSV: {0}")]
    MalformedCsv(String),
}

impl SignalConfig {
    pub fn validate(&self) -> Result<(), SignalError> {
        if !(self.sample_rate_hz > 0.0) {
            return Err(SignalError::InvalidConfig(format!(
                "sample_rate_hz must be > 0, got {}",
                self.sample_rate_hz
            )));
        }
        if !(self.duration_s > 0.0) {
            return Err(SignalError::InvalidConfig(format!(
                "duration_s must be > 0, got {}",
                self.duration_s
            )));
        }
        if !(self.fault_duration_s > 0.0) {
            return Err(SignalError::InvalidConfig(format!(
                "fault_duration_s must be > 0, got {}",
                self.fault_duration_s
            )));
        }
        if self.fault_onset_s < 0.0 || self.fault_onset_s + self.fault_duration_s >= self.duration_s
        {
            return Err(SignalError::InvalidConfig(format!(
                "fault window [{}, {}] must lie inside (0, duration_s = {})",
                self.fault_onset_s,
                self.fault_onset_s + self.fault_duration_s,
                self.duration_s
            )));
        }
        if !(0.0..=1.0).contains(&self.noise_level) {
            return Err(SignalError::InvalidConfig(format!(
                "noise_level must be in [0, 1], got {}",
                self.noise_level
            )));
        }
        if !(0.0..=1.0).contains(&self.severity) {
            return Err(SignalError::InvalidConfig(format!(
                "severity must be in [0, 1], got {}",
                self.severity
            )));
        }
        let count = self.sample_rate_hz * self.duration_s;
        if (count - count.round()).abs() > 1e-6 {
            return Err(SignalError::InvalidConfig(format!(
                "sample_rate_hz * duration_s must be an integer sample count, got {count}"
            )));
        }
        Ok(())
    }

    pub fn sample_count(&self) -> usize {
        (self.sample_rate_hz * self.duration_s).round() as usize
    }
}

/// One labeled fault interval, in seconds from record start.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelInterval {
    pub start_s: f64,
    pub end_s: f64,
    pub fault: FaultType,
}

/// A timestamped voltage sample series plus its ground-truth labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveformRecord {
    /// `(timestamp_s, voltage_pu)` pairs with uniform spacing.
    pub samples: Vec<(f64, f64)>,
    pub label_intervals: Vec<LabelInterval>,
    pub config_echo: SignalConfig,
}

impl WaveformRecord {
    /// Voltage values without timestamps.
    pub fn values(&self) -> Vec<f64> {
        self.samples.iter().map(|&(_, v)| v).collect()
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.config_echo.sample_rate_hz
    }

    /// The fault category of this record (`None` when unlabeled).
    pub fn fault_kind(&self) -> FaultType {
        self.label_intervals
            .first()
            .map(|iv| iv.fault)
            .unwrap_or(FaultType::None)
    }

    /// True if time `t_s` falls inside any labeled interval (half-open).
    pub fn in_fault(&self, t_s: f64) -> bool {
        self.label_intervals
            .iter()
            .any(|iv| t_s >= iv.start_s && t_s < iv.end_s)
    }

    /// Serialize samples as `t,v` CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.samples.len() * 24 + 4);
        out.push_str("t,v\n");
        for &(t, v) in &self.samples {
            out.push_str(&format!("{t},{v}\n"));
        }
        out
    }

    /// Parse a `t,v` CSV produced by [`WaveformRecord::to_csv`]. The sample
    /// rate is inferred from the first two timestamps; labels are empty.
    pub fn from_csv(text: &str) -> Result<WaveformRecord, SignalError> {
        let mut samples = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with('t')) {
                continue;
            }
            let (t, v) = line
                .split_once(',')
                .ok_or_else(|| SignalError::MalformedCsv(format!("line {}: {line}", lineno + 1)))?;
            let t: f64 = t
                .trim()
                .parse()
                .map_err(|e| SignalError::MalformedCsv(format!("line {}: {e}", lineno + 1)))?;
            let v: f64 = v
                .trim()
                .parse()
                .map_err(|e| SignalError::MalformedCsv(format!("line {}: {e}", lineno + 1)))?;
            samples.push((t, v));
        }
        if samples.len() < 2 {
            return Err(SignalError::MalformedCsv(
                "need at least two samples".into(),
            ));
        }
        let dt = samples[1].0 - samples[0].0;
        if dt <= 0.0 {
            return Err(SignalError::MalformedCsv(
                "timestamps must be increasing".into(),
            ));
        }
        let rate = 1.0 / dt;
        let config = SignalConfig {
            sample_rate_hz: rate,
            duration_s: samples.len() as f64 / rate,
            noise_level: 0.0,
            ..SignalConfig::default()
        };
        Ok(WaveformRecord {
            samples,
            label_intervals: Vec::new(),
            config_echo: config,
        })
    }
}

/// Label sidecar stored next to a record's CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelSidecar {
    pub fault: FaultType,
    pub intervals: Vec<LabelInterval>,
    pub config: SignalConfig,
}

impl LabelSidecar {
    pub fn for_record(record: &WaveformRecord) -> Self {
        LabelSidecar {
            fault: record.fault_kind(),
            intervals: record.label_intervals.clone(),
            config: record.config_echo.clone(),
        }
    }

    /// Re-attach sidecar labels and config to a bare CSV record.
    pub fn apply(&self, record: &mut WaveformRecord) {
        record.label_intervals = self.intervals.clone();
        record.config_echo = self.config.clone();
    }
}

/// Amplitude envelope of `fault` at time `t_s`, per the record config.
fn envelope(config: &SignalConfig, fault: FaultType, t_s: f64) -> f64 {
    let onset = config.fault_onset_s;
    let end = onset + config.fault_duration_s;
    let cycle = 1.0 / config.nominal_freq_hz;
    let s = config.severity;
    if fault == FaultType::None || t_s < onset || s == 0.0 {
        return 1.0;
    }
    let sag = |p: SagParams| -> f64 {
        let residual = 1.0 - s * (1.0 - p.residual_pu);
        let ramp_end = end + p.recovery_cycles * cycle;
        if t_s < end {
            residual
        } else if t_s < ramp_end {
            let f = (t_s - end) / (ramp_end - end);
            residual + f * (1.0 - residual)
        } else {
            1.0
        }
    };
    match fault {
        FaultType::LineToLine => sag(config.fault_params.line_to_line),
        FaultType::LineToGround => sag(config.fault_params.line_to_ground),
        FaultType::LineToLineToGround => sag(config.fault_params.line_to_line_to_ground),
        FaultType::ThreePhase => sag(config.fault_params.three_phase),
        FaultType::GeneratorTrip => {
            let p = config.fault_params.generator_trip;
            let step = 1.0 - s * (1.0 - p.step_pu);
            let dip = 1.0 - s * (1.0 - p.dip_residual_pu);
            let ring_amp = s * p.ring_amplitude_pu;
            let plateau = |t: f64| -> f64 {
                let dt = t - onset;
                step * (1.0 - ring_amp * (-dt / p.decay_s).exp() * (2.0 * std::f64::consts::PI * p.ring_hz * dt).cos())
            };
            let ramp_end = end + p.recovery_cycles * cycle;
            if t_s < end {
                dip
            } else if t_s < ramp_end {
                let f = (t_s - end) / (ramp_end - end);
                dip + f * (plateau(ramp_end) - dip)
            } else {
                plateau(t_s)
            }
        }
        FaultType::None => 1.0,
    }
}

/// Generate one record: nominal sinusoid times the fault envelope plus
/// Gaussian ambient noise. Deterministic for a fixed config.
pub fn generate_record(
    config: &SignalConfig,
    fault: FaultType,
) -> Result<WaveformRecord, SignalError> {
    config.validate()?;
    let n = config.sample_count();
    let omega = 2.0 * std::f64::consts::PI * config.nominal_freq_hz;
    let mut samples = Vec::with_capacity(n);
    let mut noise_rng = substream(config.rng_seed, "signalgen/noise");
    let noise = if config.noise_level > 0.0 {
        Some(
            Normal::new(0.0, config.noise_level * config.nominal_amplitude)
                .expect("valid noise sigma"),
        )
    } else {
        None
    };
    for i in 0..n {
        let t = i as f64 / config.sample_rate_hz;
        let clean = config.nominal_amplitude * (omega * t).sin() * envelope(config, fault, t);
        let v = match &noise {
            Some(dist) => clean + dist.sample(&mut noise_rng),
            None => clean,
        };
        samples.push((t, v));
    }
    let label_intervals = if fault == FaultType::None {
        Vec::new()
    } else {
        vec![LabelInterval {
            start_s: config.fault_onset_s,
            end_s: config.fault_onset_s + config.fault_duration_s,
            fault,
        }]
    };
    Ok(WaveformRecord {
        samples,
        label_intervals,
        config_echo: config.clone(),
    })
}

/// Fault onsets cycled across a dataset, per record index within a class.
pub const ONSET_CYCLE_S: [f64; 5] = [0.3, 0.4, 0.5, 0.6, 0.7];

/// Dataset generation knobs beyond the three headline parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetConfig {
    pub n_per_fault: usize,
    pub noise_level: f64,
    pub seed: u64,
    /// Template for rate, duration, nominal signal, and fault envelopes.
    pub base: SignalConfig,
    /// Severity is drawn uniformly from this range per fault record.
    pub severity_range: (f64, f64),
}

impl DatasetConfig {
    pub fn new(n_per_fault: usize, noise_level: f64, seed: u64) -> Self {
        DatasetConfig {
            n_per_fault,
            noise_level,
            seed,
            base: SignalConfig::default(),
            severity_range: (0.9, 1.0),
        }
    }
}

/// Generate `n_per_fault` records for each of the five fault types plus
/// `n_per_fault` pure-normal records. Onsets cycle over [`ONSET_CYCLE_S`];
/// severity is randomized per record within the configured range.
pub fn generate_dataset(
    n_per_fault: usize,
    noise_level: f64,
    seed: u64,
) -> Result<Vec<WaveformRecord>, SignalError> {
    generate_dataset_with(&DatasetConfig::new(n_per_fault, noise_level, seed))
}

pub fn generate_dataset_with(cfg: &DatasetConfig) -> Result<Vec<WaveformRecord>, SignalError> {
    if cfg.n_per_fault == 0 {
        return Err(SignalError::InvalidConfig(
            "n_per_fault must be >= 1".into(),
        ));
    }
    let (lo, hi) = cfg.severity_range;
    if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
        return Err(SignalError::InvalidConfig(format!(
            "severity_range must satisfy 0 <= lo <= hi <= 1, got ({lo}, {hi})"
        )));
    }
    let mut records = Vec::with_capacity(cfg.n_per_fault * 6);
    for fault in FaultType::FAULTS {
        for j in 0..cfg.n_per_fault {
            let label = format!("dataset/{}/{}", fault.short_name(), j);
            let mut rng = substream(cfg.seed, &label);
            let severity = if lo == hi { lo } else { rng.random_range(lo..=hi) };
            let record_seed: u64 = rng.random();
            let config = SignalConfig {
                noise_level: cfg.noise_level,
                fault_onset_s: ONSET_CYCLE_S[j % ONSET_CYCLE_S.len()],
                severity,
                rng_seed: record_seed,
                ..cfg.base.clone()
            };
            records.push(generate_record(&config, fault)?);
        }
    }
    for j in 0..cfg.n_per_fault {
        let label = format!("dataset/normal/{j}");
        let mut rng = substream(cfg.seed, &label);
        let record_seed: u64 = rng.random();
        let config = SignalConfig {
            noise_level: cfg.noise_level,
            rng_seed: record_seed,
            ..cfg.base.clone()
        };
        records.push(generate_record(&config, FaultType::None)?);
    }
    Ok(records)
}

/// Keep every `factor`-th sample starting at index 0. Labels are preserved;
/// the echoed config's sample rate is divided accordingly.
pub fn downsample(record: &WaveformRecord, factor: usize) -> Result<WaveformRecord, SignalError> {
    if factor == 0 {
        return Err(SignalError::ZeroFactor);
    }
    let samples: Vec<(f64, f64)> = record.samples.iter().copied().step_by(factor).collect();
    let mut config = record.config_echo.clone();
    config.sample_rate_hz /= factor as f64;
    Ok(WaveformRecord {
        samples,
        label_intervals: record.label_intervals.clone(),
        config_echo: config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quiet_config() -> SignalConfig {
        SignalConfig {
            noise_level: 0.0,
            ..SignalConfig::default()
        }
    }

    #[test]
    fn zero_noise_normal_is_pure_sinusoid() {
        let record = generate_record(&quiet_config(), FaultType::None).unwrap();
        assert_eq!(record.samples.len(), 1200);
        assert!(record.label_intervals.is_empty());
        for &(t, v) in &record.samples {
            let expect = (2.0 * std::f64::consts::PI * 60.0 * t).sin();
            assert!((v - expect).abs() < 1e-12, "t={t}: {v} vs {expect}");
        }
    }

    #[test]
    fn fixed_seed_is_bit_identical() {
        let config = SignalConfig {
            rng_seed: 42,
            ..SignalConfig::default()
        };
        let a = generate_record(&config, FaultType::LineToLine).unwrap();
        let b = generate_record(&config, FaultType::LineToLine).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn prefault_noise_statistics_match() {
        // (noise_level=0.05, fault=ThreePhase, onset=0.5): over the pre-fault
        // segment the residual against the clean sinusoid has std ~0.05 and
        // the total sample std is sqrt(1/2 + 0.05^2). Checked by direct
        // statistics; 3-sigma Monte-Carlo bounds on 300 samples.
        let config = SignalConfig {
            noise_level: 0.05,
            fault_onset_s: 0.5,
            rng_seed: 7,
            ..SignalConfig::default()
        };
        let record = generate_record(&config, FaultType::ThreePhase).unwrap();
        let pre: Vec<(f64, f64)> = record
            .samples
            .iter()
            .copied()
            .take_while(|&(t, _)| t < 0.3)
            .collect();
        assert_eq!(pre.len(), 180);
        let residuals: Vec<f64> = pre
            .iter()
            .map(|&(t, v)| v - (2.0 * std::f64::consts::PI * 60.0 * t).sin())
            .collect();
        let n = residuals.len() as f64;
        let mean = residuals.iter().sum::<f64>() / n;
        let var = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sigma = var.sqrt();
        // std of the sample std is roughly sigma/sqrt(2(n-1)) ~ 0.0026
        assert!(
            (sigma - 0.05).abs() < 0.008,
            "residual std {sigma} not near 0.05"
        );
        let vals: Vec<f64> = pre.iter().map(|&(_, v)| v).collect();
        let vmean = vals.iter().sum::<f64>() / n;
        let vstd =
            (vals.iter().map(|v| (v - vmean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        let expect = (0.5f64 + 0.05f64.powi(2)).sqrt();
        assert!(
            (vstd - expect).abs() < 0.02,
            "total std {vstd} not near {expect}"
        );
    }

    #[test]
    fn prefault_segment_independent_of_fault_type() {
        let config = SignalConfig {
            noise_level: 0.05,
            fault_onset_s: 0.5,
            rng_seed: 99,
            ..SignalConfig::default()
        };
        let a = generate_record(&config, FaultType::LineToLine).unwrap();
        let b = generate_record(&config, FaultType::GeneratorTrip).unwrap();
        let c = generate_record(&config, FaultType::None).unwrap();
        for i in 0..300 {
            assert_eq!(a.samples[i], b.samples[i]);
            assert_eq!(a.samples[i], c.samples[i]);
        }
    }

    #[test]
    fn label_interval_matches_config() {
        let config = SignalConfig {
            fault_onset_s: 0.4,
            fault_duration_s: 0.1,
            ..quiet_config()
        };
        let record = generate_record(&config, FaultType::LineToGround).unwrap();
        assert_eq!(record.label_intervals.len(), 1);
        let iv = record.label_intervals[0];
        assert_eq!(iv.start_s, 0.4);
        assert!((iv.end_s - 0.5).abs() < 1e-12);
        assert_eq!(iv.fault, FaultType::LineToGround);
    }

    /// Peak |sin| actually sampled at 10 samples per cycle with zero phase.
    const SAMPLED_PEAK: f64 = 0.9510565162951535;

    #[test]
    fn sag_envelope_depth_and_recovery() {
        let config = SignalConfig {
            fault_onset_s: 0.5,
            ..quiet_config()
        };
        let record = generate_record(&config, FaultType::ThreePhase).unwrap();
        // during the sag, |v| <= residual; peak near it
        let during: Vec<f64> = record
            .samples
            .iter()
            .filter(|&&(t, _)| t >= 0.5 && t < 0.6)
            .map(|&(_, v)| v.abs())
            .collect();
        let peak = during.iter().cloned().fold(0.0, f64::max);
        assert!((peak - 0.3 * SAMPLED_PEAK).abs() < 0.01, "sag peak {peak}");
        // well after recovery, amplitude is nominal again
        let after: Vec<f64> = record
            .samples
            .iter()
            .filter(|&&(t, _)| t >= 0.8)
            .map(|&(_, v)| v.abs())
            .collect();
        let peak_after = after.iter().cloned().fold(0.0, f64::max);
        assert!(
            (peak_after - SAMPLED_PEAK).abs() < 0.01,
            "post-sag peak {peak_after}"
        );
    }

    #[test]
    fn trip_envelope_dips_then_plateaus() {
        let config = SignalConfig {
            fault_onset_s: 0.3,
            ..quiet_config()
        };
        let record = generate_record(&config, FaultType::GeneratorTrip).unwrap();
        let peak_in = |lo: f64, hi: f64| {
            record
                .samples
                .iter()
                .filter(|&&(t, _)| t >= lo && t < hi)
                .map(|&(_, v)| v.abs())
                .fold(0.0, f64::max)
        };
        let dip = peak_in(0.3, 0.4);
        assert!((dip - 0.65 * SAMPLED_PEAK).abs() < 0.01, "dip peak {dip}");
        // late plateau: ring has decayed most of the way; amplitude near step
        let plateau = peak_in(1.6, 2.0);
        assert!(
            (plateau - 0.95 * SAMPLED_PEAK).abs() < 0.03,
            "plateau peak {plateau}"
        );
    }

    #[test]
    fn dataset_counts_and_determinism() {
        let set = generate_dataset(1, 0.05, 3).unwrap();
        assert_eq!(set.len(), 6);
        let faults: Vec<FaultType> = set.iter().map(|r| r.fault_kind()).collect();
        assert_eq!(faults.iter().filter(|f| **f == FaultType::None).count(), 1);

        let a = generate_dataset(2, 0.05, 11).unwrap();
        let b = generate_dataset(2, 0.05, 11).unwrap();
        assert_eq!(a, b);
        // paper-sized dataset: 28 per fault -> 140 fault + 28 normal
        let cfg = DatasetConfig {
            base: SignalConfig {
                duration_s: 1.0,
                ..SignalConfig::default()
            },
            ..DatasetConfig::new(28, 0.05, 1)
        };
        let set = generate_dataset_with(&cfg).unwrap();
        let n_fault = set
            .iter()
            .filter(|r| r.fault_kind() != FaultType::None)
            .count();
        assert_eq!(n_fault, 140);
        assert_eq!(set.len() - n_fault, 28);
    }

    #[test]
    fn dataset_onsets_cycle() {
        let set = generate_dataset(7, 0.0, 5).unwrap();
        let gt: Vec<&WaveformRecord> = set
            .iter()
            .filter(|r| r.fault_kind() == FaultType::GeneratorTrip)
            .collect();
        let onsets: Vec<f64> = gt.iter().map(|r| r.label_intervals[0].start_s).collect();
        assert_eq!(onsets, vec![0.3, 0.4, 0.5, 0.6, 0.7, 0.3, 0.4]);
    }

    #[test]
    fn downsample_identity_and_indices() {
        let record = generate_record(&quiet_config(), FaultType::None).unwrap();
        let same = downsample(&record, 1).unwrap();
        assert_eq!(same, record);

        // 12-sample series, factor 3 keeps indices 0,3,6,9
        let mini = WaveformRecord {
            samples: (0..12).map(|i| (i as f64, i as f64 * 10.0)).collect(),
            label_intervals: Vec::new(),
            config_echo: SignalConfig {
                sample_rate_hz: 1.0,
                duration_s: 12.0,
                ..SignalConfig::default()
            },
        };
        let ds = downsample(&mini, 3).unwrap();
        let kept: Vec<f64> = ds.samples.iter().map(|&(t, _)| t).collect();
        assert_eq!(kept, vec![0.0, 3.0, 6.0, 9.0]);
    }

    #[test]
    fn downsample_by_five_gives_120hz_spacing() {
        let record = generate_record(&quiet_config(), FaultType::None).unwrap();
        let ds = downsample(&record, 5).unwrap();
        assert_eq!(ds.samples.len(), 240);
        assert!((ds.config_echo.sample_rate_hz - 120.0).abs() < 1e-12);
        let dt = ds.samples[1].0 - ds.samples[0].0;
        assert!((dt - 1.0 / 120.0).abs() < 1e-12);
        assert_eq!(ds.label_intervals, record.label_intervals);
    }

    #[test]
    fn downsample_composes() {
        let record =
            generate_record(&SignalConfig::default(), FaultType::LineToLine).unwrap();
        let ab = downsample(&downsample(&record, 2).unwrap(), 3).unwrap();
        let direct = downsample(&record, 6).unwrap();
        assert_eq!(ab.samples, direct.samples);
    }

    #[test]
    fn zero_factor_rejected() {
        let record = generate_record(&quiet_config(), FaultType::None).unwrap();
        assert!(matches!(
            downsample(&record, 0),
            Err(SignalError::ZeroFactor)
        ));
    }

    #[test]
    fn invalid_configs_name_the_bound() {
        let bad = SignalConfig {
            fault_onset_s: 1.95,
            ..SignalConfig::default()
        };
        let err = generate_record(&bad, FaultType::LineToLine).unwrap_err();
        assert!(err.to_string().contains("duration_s"));

        let bad = SignalConfig {
            duration_s: 2.0001,
            ..SignalConfig::default()
        };
        let err = generate_record(&bad, FaultType::LineToLine).unwrap_err();
        assert!(err.to_string().contains("integer sample count"));
    }

    #[test]
    fn csv_round_trip() {
        let record = generate_record(
            &SignalConfig {
                rng_seed: 5,
                ..SignalConfig::default()
            },
            FaultType::ThreePhase,
        )
        .unwrap();
        let csv = record.to_csv();
        let parsed = WaveformRecord::from_csv(&csv).unwrap();
        assert_eq!(parsed.samples, record.samples);
        let mut restored = parsed;
        LabelSidecar::for_record(&record).apply(&mut restored);
        assert_eq!(restored, record);
    }
}
