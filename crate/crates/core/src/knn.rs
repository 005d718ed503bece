//! Window features and k-nearest-neighbor normal/fault classification.
//!
//! Each one-cycle window of samples is reduced to sixteen scalar features:
//! global statistics (harmonic mean, standard deviation, mean deviation,
//! kurtosis), entropies (log-energy, Shannon-style, Renyi with alpha = 0.4),
//! amplitude descriptors (the square root of the mean absolute value, peak,
//! peak-to-peak), and spectral terms from the window DFT (total harmonic
//! distortion and the magnitudes of bins 1..5). Classification is a majority
//! vote among the k nearest training windows in standardized feature space.
//!
//! Logs and fractional powers are evaluated on absolute values with an
//! epsilon floor so every feature is finite on arbitrary finite windows.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{summarize, ClassAccuracy};
use crate::signalgen::{FaultType, WaveformRecord};

/// Floor applied to |d| before logs, reciprocals, and fractional powers.
const EPS: f64 = 1e-12;

/// Renyi entropy order; tuned value from the detection study.
pub const RENYI_ALPHA: f64 = 0.4;

/// Serialized model format version.
pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum KnnError {
    #[error("window of {len} samples is too short (need >= 2)")]
    WindowTooShort { len: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("training set contains a single class; need both normal and fault windows")]
    SingleClass,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("feature coordinates have {got} entries, model expects {expected}")]
    CoordinateDim { got: usize, expected: usize },
    #[error("model file error: {0}")]
    ModelFormat(String),
}

/// The sixteen per-window features, in definition order (`values[0]` is F1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: [f64; 16],
}

impl FeatureVector {
    /// Feature by 1-based index F1..F16.
    pub fn get(&self, index: usize) -> f64 {
        self.values[index - 1]
    }
}

/// DFT with the window's samples indexed from 1:
/// `D_k = sum_j d_j exp(-i 2 pi k j / N)` for k = 0..N-1 (bin 0 is DC).
/// Bin magnitudes match the conventional DFT; only phases differ.
pub fn dft(window: &[f64]) -> Vec<Complex64> {
    let n = window.len();
    let scale = -2.0 * std::f64::consts::PI / n as f64;
    (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, &d) in window.iter().enumerate() {
                let phase = scale * (k * (j + 1)) as f64;
                acc += d * Complex64::new(phase.cos(), phase.sin());
            }
            acc
        })
        .collect()
}

/// Evaluate F1..F16 on one window.
pub fn extract_features(window: &[f64]) -> Result<FeatureVector, KnnError> {
    let n = window.len();
    if n < 2 {
        return Err(KnnError::WindowTooShort { len: n });
    }
    let nf = n as f64;
    let mean = window.iter().sum::<f64>() / nf;
    let mut inv_sum = 0.0;
    let mut dev_sq = 0.0;
    let mut dev_abs = 0.0;
    let mut dev_quad = 0.0;
    let mut log_sq = 0.0;
    let mut shannon = 0.0;
    let mut renyi_sum = 0.0;
    let mut abs_sum = 0.0;
    let mut max = f64::NEG_INFINITY;
    let mut min = f64::INFINITY;
    for &d in window {
        let a = d.abs().max(EPS);
        inv_sum += 1.0 / a;
        let dev = d - mean;
        dev_sq += dev * dev;
        dev_abs += dev.abs();
        dev_quad += dev * dev * dev * dev;
        log_sq += (a * a).ln();
        shannon -= d * d * (a * a).ln();
        renyi_sum += a.powf(RENYI_ALPHA);
        abs_sum += d.abs();
        max = max.max(d);
        min = min.min(d);
    }
    let f1 = nf / inv_sum;
    let f2 = (dev_sq / (nf - 1.0)).sqrt();
    let f3 = dev_abs / nf;
    let m2 = dev_sq / nf;
    let f4 = if m2 < 1e-24 {
        0.0 // kurtosis of a zero-variance window, by convention
    } else {
        (dev_quad / nf) / (m2 * m2)
    };
    let f5 = log_sq;
    let f6 = shannon;
    let f7 = (renyi_sum.max(EPS)).ln() / (1.0 - RENYI_ALPHA);
    let f8 = (abs_sum / nf).sqrt();
    let f9 = max;
    let f10 = max - min;

    let spectrum = dft(window);
    let mag = |k: usize| spectrum[k % n].norm();
    // harmonic energy over bins 2..=N relative to the fundamental (bin N
    // aliases to DC under the 1-based summation)
    let mut harm = 0.0;
    for k in 2..=n {
        let m = mag(k);
        harm += m * m;
    }
    let f11 = harm.sqrt() / mag(1).max(EPS);
    let f12 = mag(1);
    let f13 = mag(2);
    let f14 = mag(3);
    let f15 = mag(4);
    let f16 = mag(5);

    Ok(FeatureVector {
        values: [
            f1, f2, f3, f4, f5, f6, f7, f8, f9, f10, f11, f12, f13, f14, f15, f16,
        ],
    })
}

/// Classifier parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnConfig {
    /// Number of voting neighbors (odd).
    pub neighbors: usize,
    /// Window length in samples; one nominal cycle by default.
    pub window_len: usize,
    /// 1-based feature indices used for classification.
    pub selected_features: Vec<usize>,
    /// Z-score features by training mean/std before measuring distances.
    pub standardize: bool,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig {
            neighbors: 5,
            window_len: 10,
            selected_features: vec![6, 8, 9, 10],
            standardize: true,
        }
    }
}

impl KnnConfig {
    pub fn validate(&self) -> Result<(), KnnError> {
        if self.neighbors == 0 || self.neighbors.is_multiple_of(2) {
            return Err(KnnError::InvalidConfig(format!(
                "neighbors must be odd and >= 1, got {}",
                self.neighbors
            )));
        }
        if self.window_len < 2 {
            return Err(KnnError::InvalidConfig(format!(
                "window_len must be >= 2, got {}",
                self.window_len
            )));
        }
        if self.selected_features.is_empty()
            || self.selected_features.iter().any(|&i| i == 0 || i > 16)
        {
            return Err(KnnError::InvalidConfig(format!(
                "selected_features must be nonempty indices in 1..=16, got {:?}",
                self.selected_features
            )));
        }
        Ok(())
    }
}

/// One non-overlapping window of a record, with its ground-truth label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpan {
    /// First sample index.
    pub start: usize,
    /// One past the last sample index.
    pub end: usize,
    pub t_start: f64,
    /// Timestamp of the last sample in the window.
    pub t_last: f64,
    /// True when the window overlaps a labeled fault interval.
    pub is_fault: bool,
}

/// Non-overlapping windows of `window_len` samples covering the record.
pub fn record_windows(record: &WaveformRecord, window_len: usize) -> Vec<WindowSpan> {
    let n = record.samples.len();
    let mut spans = Vec::with_capacity(n / window_len);
    let mut start = 0;
    while start + window_len <= n {
        let end = start + window_len;
        let t_start = record.samples[start].0;
        let t_last = record.samples[end - 1].0;
        let is_fault = record
            .label_intervals
            .iter()
            .any(|iv| t_start < iv.end_s && t_last >= iv.start_s);
        spans.push(WindowSpan {
            start,
            end,
            t_start,
            t_last,
            is_fault,
        });
        start = end;
    }
    spans
}

/// A trained classifier: standardized training points plus the statistics
/// needed to map a fresh window into the same space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub config: KnnConfig,
    /// Per-selected-feature training mean (zeros when not standardizing).
    pub feature_means: Vec<f64>,
    /// Per-selected-feature training scale (ones when not standardizing).
    pub feature_scales: Vec<f64>,
    points: Vec<TrainPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TrainPoint {
    coords: Vec<f64>,
    is_fault: bool,
}

/// Outcome of classifying one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub is_fault: bool,
    /// (majority votes - minority votes) / k.
    pub margin: f64,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    version: u32,
    model: KnnModel,
}

impl KnnModel {
    /// Build a model from raw feature-space points (one coordinate per
    /// selected feature) and binary labels.
    pub fn from_points(
        raw_points: Vec<(Vec<f64>, bool)>,
        config: KnnConfig,
    ) -> Result<KnnModel, KnnError> {
        config.validate()?;
        if raw_points.is_empty() {
            return Err(KnnError::EmptyDataset);
        }
        let dim = config.selected_features.len();
        for (coords, _) in &raw_points {
            if coords.len() != dim {
                return Err(KnnError::CoordinateDim {
                    got: coords.len(),
                    expected: dim,
                });
            }
        }
        let any_fault = raw_points.iter().any(|(_, f)| *f);
        let any_normal = raw_points.iter().any(|(_, f)| !*f);
        if !any_fault || !any_normal {
            return Err(KnnError::SingleClass);
        }
        let n = raw_points.len() as f64;
        let mut means = vec![0.0; dim];
        let mut scales = vec![1.0; dim];
        if config.standardize {
            for (coords, _) in &raw_points {
                for (m, c) in means.iter_mut().zip(coords) {
                    *m += c;
                }
            }
            for m in &mut means {
                *m /= n;
            }
            for (j, scale) in scales.iter_mut().enumerate() {
                let var: f64 = raw_points
                    .iter()
                    .map(|(c, _)| (c[j] - means[j]).powi(2))
                    .sum::<f64>()
                    / (n - 1.0).max(1.0);
                let std = var.sqrt();
                if std > 0.0 {
                    *scale = std;
                } else {
                    log::warn!(
                        "feature F{} has zero variance in training; scale left at 1",
                        config.selected_features[j]
                    );
                }
            }
        }
        let points = raw_points
            .into_iter()
            .map(|(coords, is_fault)| TrainPoint {
                coords: coords
                    .iter()
                    .zip(means.iter().zip(&scales))
                    .map(|(c, (m, s))| (c - m) / s)
                    .collect(),
                is_fault,
            })
            .collect();
        Ok(KnnModel {
            config,
            feature_means: means,
            feature_scales: scales,
            points,
        })
    }

    pub fn point_count(&self) -> usize {
        self.points.len()
    }

    /// Select the configured features from a full feature vector.
    pub fn select(&self, features: &FeatureVector) -> Vec<f64> {
        self.config
            .selected_features
            .iter()
            .map(|&i| features.get(i))
            .collect()
    }

    /// Classify a raw sample window.
    pub fn classify(&self, window: &[f64]) -> Result<Classification, KnnError> {
        let features = extract_features(window)?;
        self.classify_point(&self.select(&features))
    }

    /// Classify a point given as raw (unstandardized) selected-feature
    /// coordinates.
    pub fn classify_point(&self, raw_coords: &[f64]) -> Result<Classification, KnnError> {
        let dim = self.config.selected_features.len();
        if raw_coords.len() != dim {
            return Err(KnnError::CoordinateDim {
                got: raw_coords.len(),
                expected: dim,
            });
        }
        let query: Vec<f64> = raw_coords
            .iter()
            .zip(self.feature_means.iter().zip(&self.feature_scales))
            .map(|(c, (m, s))| (c - m) / s)
            .collect();
        let mut dists: Vec<(f64, usize)> = self
            .points
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let d2: f64 = p
                    .coords
                    .iter()
                    .zip(&query)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                (d2, i)
            })
            .collect();
        dists.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let k = self.config.neighbors.min(dists.len());
        let fault_votes = dists[..k]
            .iter()
            .filter(|&&(_, i)| self.points[i].is_fault)
            .count();
        let normal_votes = k - fault_votes;
        // ties break toward fault: missing a real event costs more than a
        // spurious high-priority frame
        let is_fault = fault_votes >= normal_votes;
        let margin =
            (fault_votes.max(normal_votes) - fault_votes.min(normal_votes)) as f64 / k as f64;
        Ok(Classification { is_fault, margin })
    }

    /// Versioned JSON serialization.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ModelFile {
            version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        })
        .expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<KnnModel, KnnError> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| KnnError::ModelFormat(e.to_string()))?;
        if file.version != MODEL_FORMAT_VERSION {
            return Err(KnnError::ModelFormat(format!(
                "unsupported model version {} (expected {})",
                file.version, MODEL_FORMAT_VERSION
            )));
        }
        Ok(file.model)
    }
}

/// Train a model from labeled records: slide non-overlapping windows, label
/// each by fault-interval overlap, extract the selected features, and store
/// standardized training points.
pub fn train(records: &[WaveformRecord], config: &KnnConfig) -> Result<KnnModel, KnnError> {
    config.validate()?;
    if records.is_empty() {
        return Err(KnnError::EmptyDataset);
    }
    let mut raw_points = Vec::new();
    for record in records {
        let values = record.values();
        for span in record_windows(record, config.window_len) {
            let features = extract_features(&values[span.start..span.end])?;
            let coords: Vec<f64> = config
                .selected_features
                .iter()
                .map(|&i| features.get(i))
                .collect();
            raw_points.push((coords, span.is_fault));
        }
    }
    KnnModel::from_points(raw_points, config.clone())
}

/// Per-class record-level accuracy of a model over a labeled dataset.
///
/// A record is a true positive when at least one window overlapping its
/// fault interval classifies as fault, and a false positive when a window
/// strictly outside the interval (expanded by a one-window guard band)
/// classifies as fault.
pub fn evaluate(
    model: &KnnModel,
    records: &[WaveformRecord],
) -> Result<BTreeMap<FaultType, ClassAccuracy>, KnnError> {
    if records.is_empty() {
        return Err(KnnError::EmptyDataset);
    }
    let mut outcomes = Vec::with_capacity(records.len());
    for record in records {
        let values = record.values();
        let guard_s = model.config.window_len as f64 / record.sample_rate_hz();
        let mut hit = false;
        let mut false_alarm = false;
        for span in record_windows(record, model.config.window_len) {
            let verdict = model.classify(&values[span.start..span.end])?;
            if !verdict.is_fault {
                continue;
            }
            if span.is_fault {
                hit = true;
                continue;
            }
            let guarded = record
                .label_intervals
                .iter()
                .any(|iv| span.t_start < iv.end_s + guard_s && span.t_last >= iv.start_s - guard_s);
            if !guarded {
                false_alarm = true;
            }
        }
        outcomes.push((record.fault_kind(), hit, false_alarm));
    }
    Ok(summarize(&outcomes))
}
