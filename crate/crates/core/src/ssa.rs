//! Singular-spectrum-analysis change-point detection.
//!
//! A sliding target window of the series is embedded into a Hankel trajectory
//! matrix and decomposed by SVD; the leading left singular vectors span the
//! "normal" signal subspace. Lag vectors taken from a test region ahead of the
//! target window are scored by their total squared residual against that
//! subspace. A change point shows up as a sharp increase of the residual
//! distance relative to a baseline calibrated on normal data.

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::ClassAccuracy;
use crate::signalgen::{FaultType, LabelInterval, WaveformRecord};

/// How the target window is anchored as detection slides along the series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetPolicy {
    /// Target fixed at the start of the record (batch processing).
    #[default]
    FixedStart,
    /// Target re-anchored at the most recent window confirmed normal.
    Streaming,
}

/// Detection parameters. Wire keys in config files use the customary short
/// names: `n` (target length), `m` (window length), `p`/`q` (test region
/// offsets), `l` (subspace dimension).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SsaConfig {
    /// Target series length.
    #[serde(rename = "n")]
    pub series_len: usize,
    /// Embedding window length.
    #[serde(rename = "m")]
    pub window_len: usize,
    /// Test region start offset.
    #[serde(rename = "p")]
    pub test_offset: usize,
    /// Test region end offset; the test matrix has `q - p + 1` columns.
    #[serde(rename = "q")]
    pub test_extent: usize,
    /// Signal subspace dimension.
    #[serde(rename = "l")]
    pub subspace_dim: usize,
    /// A point is anomalous when its baseline-normalized distance exceeds
    /// this ratio.
    pub threshold_ratio: f64,
    /// Mean distance under normal conditions, from [`calibrate_baseline`].
    #[serde(default)]
    pub baseline_distance: Option<f64>,
    #[serde(default)]
    pub target_policy: TargetPolicy,
}

impl Default for SsaConfig {
    fn default() -> Self {
        SsaConfig {
            series_len: 36,
            window_len: 18,
            test_offset: 18,
            test_extent: 30,
            subspace_dim: 6,
            threshold_ratio: 9.0e6,
            baseline_distance: None,
            target_policy: TargetPolicy::FixedStart,
        }
    }
}

impl SsaConfig {
    pub fn validate(&self) -> Result<(), SsaError> {
        if self.subspace_dim < 1
            || self.subspace_dim >= self.window_len
            || self.window_len > self.series_len
        {
            return Err(SsaError::InvalidConfig(format!(
                "need 1 <= l < m <= n, got l={}, m={}, n={}",
                self.subspace_dim, self.window_len, self.series_len
            )));
        }
        if self.test_offset >= self.test_extent {
            return Err(SsaError::InvalidConfig(format!(
                "need p < q, got p={}, q={}",
                self.test_offset, self.test_extent
            )));
        }
        if !(self.threshold_ratio > 0.0) {
            return Err(SsaError::InvalidConfig(format!(
                "threshold_ratio must be > 0, got {}",
                self.threshold_ratio
            )));
        }
        Ok(())
    }

    /// Number of trajectory columns K = N - M + 1.
    pub fn lag_count(&self) -> usize {
        self.series_len - self.window_len + 1
    }

    /// Samples needed past the window anchor so the attributed time index
    /// n + M + q is itself a valid sample.
    pub fn window_need(&self) -> usize {
        self.window_len + self.test_extent + 1
    }
}

#[derive(Debug, Error)]
pub enum SsaError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("series of length {len} is shorter than window length {window}")]
    SeriesTooShort { len: usize, window: usize },
    #[error("window at offset {offset} needs {needed} samples, series has {len}")]
    WindowOutOfRange {
        offset: usize,
        needed: usize,
        len: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("reconstruction length {given} does not match trajectory size {expected}")]
    BadReconstructionLength { given: usize, expected: usize },
    #[error("baseline distance not calibrated")]
    NotCalibrated,
    #[error("calibration requires at least one record")]
    EmptyCalibration,
    #[error("record too short: {len} samples, need at least {required}")]
    RecordTooShort { len: usize, required: usize },
}

/// Hankel trajectory matrix of a series: column j holds the lag vector
/// starting at sample j, so entries are constant along skew-diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMatrix {
    pub entries: DMatrix<f64>,
}

impl TrajectoryMatrix {
    pub fn rows(&self) -> usize {
        self.entries.nrows()
    }

    pub fn cols(&self) -> usize {
        self.entries.ncols()
    }

    /// Check the skew-diagonal (Hankel) property within `tol`.
    pub fn is_hankel(&self, tol: f64) -> bool {
        let (m, k) = (self.rows(), self.cols());
        for i in 1..m {
            for j in 1..k {
                if (self.entries[(i, j - 1)] - self.entries[(i - 1, j)]).abs() > tol {
                    return false;
                }
            }
        }
        true
    }
}

/// One (singular value, left vector, right vector) component of the SVD.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenTriple {
    pub singular_value: f64,
    pub left: DVector<f64>,
    pub right: DVector<f64>,
}

/// Embed a series into its M x K trajectory matrix, K = len - M + 1.
pub fn embed(series: &[f64], window_len: usize) -> Result<TrajectoryMatrix, SsaError> {
    if window_len == 0 {
        return Err(SsaError::InvalidConfig("window length must be >= 1".into()));
    }
    if series.len() < window_len {
        return Err(SsaError::SeriesTooShort {
            len: series.len(),
            window: window_len,
        });
    }
    let k = series.len() - window_len + 1;
    let entries = DMatrix::from_fn(window_len, k, |i, j| series[i + j]);
    Ok(TrajectoryMatrix { entries })
}

/// Singular value decomposition of a trajectory matrix, returned as
/// eigentriples sorted by decreasing singular value. Numerically zero
/// components are dropped; an all-zero matrix yields an empty list.
///
/// Uses one-sided Jacobi orthogonalization, which stays accurate on the
/// degenerate (rank-deficient, repeated-singular-value) trajectory matrices
/// that constant or pure-tone windows produce.
pub fn svd(x: &TrajectoryMatrix) -> Vec<EigenTriple> {
    let (m, k) = (x.rows(), x.cols());
    let (u_tall, sigmas, v_tall) = if m >= k {
        jacobi_svd_tall(&x.entries)
    } else {
        // transpose swaps the roles of the singular vector sets
        let (ut, s, vt) = jacobi_svd_tall(&x.entries.transpose());
        (vt, s, ut)
    };
    let sigma_max = sigmas.iter().cloned().fold(0.0f64, f64::max);
    let tol = sigma_max * 1e-13;
    let mut triples: Vec<EigenTriple> = sigmas
        .iter()
        .enumerate()
        .filter(|&(_, s)| *s > tol && *s > 0.0)
        .map(|(i, s)| EigenTriple {
            singular_value: *s,
            left: u_tall.column(i).into_owned(),
            right: v_tall.column(i).into_owned(),
        })
        .collect();
    triples.sort_by(|a, b| b.singular_value.total_cmp(&a.singular_value));
    triples
}

/// One-sided Jacobi SVD of a tall matrix (rows >= cols): A = U diag(s) V'.
/// Columns of the working copy are rotated pairwise until mutually
/// orthogonal; their norms are the singular values.
fn jacobi_svd_tall(a: &DMatrix<f64>) -> (DMatrix<f64>, Vec<f64>, DMatrix<f64>) {
    let n = a.ncols();
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    const MAX_SWEEPS: usize = 64;
    const TOL: f64 = 1e-15;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let alpha = w.column(p).dot(&w.column(p));
                let beta = w.column(q).dot(&w.column(q));
                let gamma = w.column(p).dot(&w.column(q));
                if gamma == 0.0 || gamma.abs() <= TOL * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta >= 0.0 {
                    1.0 / (zeta + (1.0 + zeta * zeta).sqrt())
                } else {
                    -1.0 / (-zeta + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for row in 0..w.nrows() {
                    let wp = w[(row, p)];
                    let wq = w[(row, q)];
                    w[(row, p)] = c * wp - s * wq;
                    w[(row, q)] = s * wp + c * wq;
                }
                for row in 0..n {
                    let vp = v[(row, p)];
                    let vq = v[(row, q)];
                    v[(row, p)] = c * vp - s * vq;
                    v[(row, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let mut sigmas = Vec::with_capacity(n);
    let mut u = DMatrix::<f64>::zeros(a.nrows(), n);
    for j in 0..n {
        let norm = w.column(j).norm();
        sigmas.push(norm);
        if norm > 0.0 {
            u.set_column(j, &(w.column(j) / norm));
        }
    }
    (u, sigmas, v)
}

/// Rebuild the selected rank-one components and hankelize the sum back into
/// a series of length `series_len` by diagonal averaging.
///
/// `indices` selects triples by position (0-based) in the decomposition.
/// An empty selection yields the zero series.
pub fn reconstruct(
    triples: &[EigenTriple],
    indices: &[usize],
    series_len: usize,
) -> Result<Vec<f64>, SsaError> {
    if triples.is_empty() || indices.is_empty() {
        return Ok(vec![0.0; series_len]);
    }
    let m = triples[0].left.len();
    let k = triples[0].right.len();
    if series_len != m + k - 1 {
        return Err(SsaError::BadReconstructionLength {
            given: series_len,
            expected: m + k - 1,
        });
    }
    let mut matrix = DMatrix::<f64>::zeros(m, k);
    for &idx in indices {
        let t = triples.get(idx).ok_or_else(|| {
            SsaError::DimensionMismatch(format!("triple index {idx} out of range"))
        })?;
        matrix += t.singular_value * &t.left * t.right.transpose();
    }
    Ok(diagonal_average(&matrix))
}

/// Convenience: reconstruct from all triples.
pub fn reconstruct_all(triples: &[EigenTriple], series_len: usize) -> Result<Vec<f64>, SsaError> {
    let all: Vec<usize> = (0..triples.len()).collect();
    reconstruct(triples, &all, series_len)
}

/// Average the matrix along its skew-diagonals. For M <= K this is exactly
/// the three-branch diagonal averaging formula; the general form also covers
/// M > K (single-column and tall embeddings).
fn diagonal_average(matrix: &DMatrix<f64>) -> Vec<f64> {
    let (m, k) = (matrix.nrows(), matrix.ncols());
    let n = m + k - 1;
    let mut out = vec![0.0; n];
    for (i, slot) in out.iter_mut().enumerate() {
        // entries (r, c) with r + c == i, 0 <= r < m, 0 <= c < k
        let r_lo = i.saturating_sub(k - 1);
        let r_hi = i.min(m - 1);
        let mut acc = 0.0;
        for r in r_lo..=r_hi {
            acc += matrix[(r, i - r)];
        }
        *slot = acc / (r_hi - r_lo + 1) as f64;
    }
    out
}

/// Orthonormal basis of the signal subspace: the first `l` left singular
/// vectors of the target matrix embedded at offset `start`. If the target has
/// rank below `l`, the effective dimension shrinks accordingly.
pub fn build_target(
    series: &[f64],
    start: usize,
    cfg: &SsaConfig,
) -> Result<DMatrix<f64>, SsaError> {
    let needed = cfg.series_len;
    if start + needed > series.len() {
        return Err(SsaError::WindowOutOfRange {
            offset: start,
            needed,
            len: series.len(),
        });
    }
    let target = embed(&series[start..start + needed], cfg.window_len)?;
    let triples = svd(&target);
    let dim = cfg.subspace_dim.min(triples.len());
    let mut basis = DMatrix::<f64>::zeros(cfg.window_len, dim);
    for (i, t) in triples.iter().take(dim).enumerate() {
        basis.set_column(i, &t.left);
    }
    Ok(basis)
}

/// Test matrix at offset `start`: lag vectors of length M beginning at
/// offsets p..=q past `start`, one per column (q - p + 1 in total).
pub fn build_test(series: &[f64], start: usize, cfg: &SsaConfig) -> Result<DMatrix<f64>, SsaError> {
    let needed = cfg.window_need();
    if start + needed > series.len() {
        return Err(SsaError::WindowOutOfRange {
            offset: start,
            needed,
            len: series.len(),
        });
    }
    let cols = cfg.test_extent - cfg.test_offset + 1;
    let entries = DMatrix::from_fn(cfg.window_len, cols, |i, c| {
        series[start + cfg.test_offset + c + i]
    });
    Ok(entries)
}

/// Sum of squared residuals of the test columns against the subspace:
/// sum_i (x_i' x_i - x_i' U U' x_i). Nonnegative up to rounding for a
/// column-orthonormal basis.
pub fn distance(test: &DMatrix<f64>, basis: &DMatrix<f64>) -> Result<f64, SsaError> {
    if basis.ncols() > 0 && basis.nrows() != test.nrows() {
        return Err(SsaError::DimensionMismatch(format!(
            "test rows {} vs basis rows {}",
            test.nrows(),
            basis.nrows()
        )));
    }
    let mut total = 0.0;
    for col in test.column_iter() {
        let energy = col.dot(&col);
        let projected = if basis.ncols() == 0 {
            0.0
        } else {
            let coeffs = basis.transpose() * col;
            coeffs.dot(&coeffs)
        };
        total += energy - projected;
    }
    Ok(total)
}

/// One emitted detection point. The attributed sample index is n + M + q for
/// a window anchored at offset n; `distance` is normalized by the calibrated
/// baseline, `raw_distance` is the plain residual sum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionPoint {
    pub sample_index: usize,
    pub time_s: f64,
    pub raw_distance: f64,
    pub distance: f64,
    pub is_anomaly: bool,
}

/// Detection output over one record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSeries {
    pub points: Vec<DetectionPoint>,
    pub baseline_distance: f64,
    pub threshold_ratio: f64,
    /// Mean wall-clock cost per window, in seconds. Reported for sizing the
    /// detector on embedded hardware; excluded from serialized artifacts.
    #[serde(skip)]
    pub mean_window_cost_s: f64,
}

impl DetectionSeries {
    /// Times of anomalous points at the configured threshold.
    pub fn flagged_times(&self) -> Vec<f64> {
        self.points
            .iter()
            .filter(|p| p.is_anomaly)
            .map(|p| p.time_s)
            .collect()
    }

    /// Times of points whose normalized distance exceeds `ratio`.
    pub fn flagged_times_at(&self, ratio: f64) -> Vec<f64> {
        self.points
            .iter()
            .filter(|p| p.distance > ratio)
            .map(|p| p.time_s)
            .collect()
    }
}

/// Slide detection across a record. Requires a calibrated baseline.
pub fn detect(record: &WaveformRecord, cfg: &SsaConfig) -> Result<DetectionSeries, SsaError> {
    cfg.validate()?;
    let baseline = cfg.baseline_distance.ok_or(SsaError::NotCalibrated)?;
    if !(baseline > 0.0) {
        return Err(SsaError::InvalidConfig(format!(
            "baseline_distance must be > 0, got {baseline}"
        )));
    }
    let series = record.values();
    let required = cfg.series_len + cfg.window_len + cfg.test_extent + 1;
    if series.len() < required {
        return Err(SsaError::RecordTooShort {
            len: series.len(),
            required,
        });
    }
    let started = Instant::now();
    let last_start = series.len() - cfg.window_need();
    let max_anchor = series.len() - cfg.series_len;
    let mut anchor = 0usize;
    let mut next_anchor = 0usize;
    let mut basis = build_target(&series, anchor, cfg)?;
    let mut points = Vec::with_capacity(last_start + 1);
    for n in 0..=last_start {
        if cfg.target_policy == TargetPolicy::Streaming && anchor != next_anchor {
            anchor = next_anchor;
            basis = build_target(&series, anchor, cfg)?;
        }
        let test = build_test(&series, n, cfg)?;
        let raw = distance(&test, &basis)?.max(0.0);
        let normalized = raw / baseline;
        let is_anomaly = normalized > cfg.threshold_ratio;
        let sample_index = n + cfg.window_len + cfg.test_extent;
        points.push(DetectionPoint {
            sample_index,
            time_s: record.samples[sample_index].0,
            raw_distance: raw,
            distance: normalized,
            is_anomaly,
        });
        if cfg.target_policy == TargetPolicy::Streaming && !is_anomaly {
            // region confirmed normal: the target may advance next step
            next_anchor = (n + 1).min(max_anchor);
        }
    }
    let mean_window_cost_s = started.elapsed().as_secs_f64() / points.len().max(1) as f64;
    Ok(DetectionSeries {
        points,
        baseline_distance: baseline,
        threshold_ratio: cfg.threshold_ratio,
        mean_window_cost_s,
    })
}

/// Mean residual distance over all windows of all normal records. This is
/// the normalization constant that makes `threshold_ratio` dimensionless.
pub fn calibrate_baseline(records: &[WaveformRecord], cfg: &SsaConfig) -> Result<f64, SsaError> {
    cfg.validate()?;
    if records.is_empty() {
        return Err(SsaError::EmptyCalibration);
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for record in records {
        let series = record.values();
        let required = cfg.series_len + cfg.window_len + cfg.test_extent + 1;
        if series.len() < required {
            return Err(SsaError::RecordTooShort {
                len: series.len(),
                required,
            });
        }
        let basis = build_target(&series, 0, cfg)?;
        let last_start = series.len() - cfg.window_need();
        for n in 0..=last_start {
            let test = build_test(&series, n, cfg)?;
            sum += distance(&test, &basis)?.max(0.0);
            count += 1;
        }
    }
    let mean = sum / count as f64;
    if mean < 1e-15 {
        log::warn!("calibration baseline {mean:e} is degenerate (noiseless input?)");
    }
    Ok(mean.max(1e-300))
}

/// Record-level outcome at threshold `ratio`: did any flagged point fall
/// inside a labeled interval (hit), and did any fall on a normal segment
/// outside every interval plus `guard_s` of settling time (false alarm)?
pub fn record_outcome(
    points: &[DetectionPoint],
    intervals: &[LabelInterval],
    ratio: f64,
    guard_s: f64,
) -> (bool, bool) {
    let mut hit = false;
    let mut false_alarm = false;
    for p in points {
        if p.distance <= ratio {
            continue;
        }
        let inside = intervals
            .iter()
            .any(|iv| p.time_s >= iv.start_s && p.time_s < iv.end_s);
        let guarded = intervals
            .iter()
            .any(|iv| p.time_s >= iv.start_s && p.time_s < iv.end_s + guard_s);
        if inside {
            hit = true;
        } else if !guarded {
            false_alarm = true;
        }
    }
    (hit, false_alarm)
}

/// Detection runs paired with their ground truth, ready for evaluation.
pub type DetectionRun = (FaultType, Vec<LabelInterval>, DetectionSeries);

/// Aggregate per-class accuracy for a set of detections at a threshold.
pub fn evaluate_at(
    runs: &[DetectionRun],
    ratio: f64,
    guard_s: f64,
) -> BTreeMap<FaultType, ClassAccuracy> {
    let outcomes: Vec<(FaultType, bool, bool)> = runs
        .iter()
        .map(|(fault, intervals, series)| {
            let (hit, false_alarm) = record_outcome(&series.points, intervals, ratio, guard_s);
            (*fault, hit, false_alarm)
        })
        .collect();
    crate::eval::summarize(&outcomes)
}

/// One point of a threshold sweep: overall TPR across fault records and
/// record-level FPR across all records.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RocPoint {
    pub threshold_ratio: f64,
    pub tpr: f64,
    pub fpr: f64,
}

/// Sweep the detection threshold over `ratios` and report one ROC point per
/// value. Distances are reused from the detection runs, so the sweep is a
/// pure re-thresholding.
pub fn roc_sweep(runs: &[DetectionRun], ratios: &[f64], guard_s: f64) -> Vec<RocPoint> {
    ratios
        .iter()
        .map(|&ratio| {
            let mut fault_records = 0usize;
            let mut hits = 0usize;
            let mut alarms = 0usize;
            for (fault, intervals, series) in runs {
                let (hit, false_alarm) = record_outcome(&series.points, intervals, ratio, guard_s);
                if *fault != FaultType::None {
                    fault_records += 1;
                    if hit {
                        hits += 1;
                    }
                }
                if false_alarm {
                    alarms += 1;
                }
            }
            RocPoint {
                threshold_ratio: ratio,
                tpr: if fault_records == 0 {
                    0.0
                } else {
                    hits as f64 / fault_records as f64
                },
                fpr: alarms as f64 / runs.len() as f64,
            }
        })
        .collect()
}

/// Logarithmic threshold grid for ROC sweeps.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && count >= 2);
    let step = (hi / lo).ln() / (count - 1) as f64;
    (0..count).map(|i| lo * (step * i as f64).exp()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signalgen::{generate_record, FaultType, SignalConfig};

    fn series_0123() -> Vec<f64> {
        vec![1.0, 2.0, 3.0, 4.0]
    }

    #[test]
    fn embed_lag_columns() {
        let x = embed(&series_0123(), 2).unwrap();
        assert_eq!(x.rows(), 2);
        assert_eq!(x.cols(), 3);
        assert_eq!(x.entries.column(0).as_slice(), &[1.0, 2.0]);
        assert_eq!(x.entries.column(1).as_slice(), &[2.0, 3.0]);
        assert_eq!(x.entries.column(2).as_slice(), &[3.0, 4.0]);
        assert!(x.is_hankel(0.0));
    }

    #[test]
    fn embed_constant_series_rank_one() {
        let x = embed(&[3.0; 7], 3).unwrap();
        assert!(x.entries.iter().all(|&e| e == 3.0));
        let triples = svd(&x);
        assert_eq!(triples.len(), 1);
    }

    #[test]
    fn embed_full_window_single_column() {
        let s = vec![1.0, -2.0, 0.5];
        let x = embed(&s, 3).unwrap();
        assert_eq!(x.cols(), 1);
        assert_eq!(x.entries.column(0).as_slice(), s.as_slice());
    }

    #[test]
    fn embed_too_short_errors() {
        assert!(matches!(
            embed(&[1.0, 2.0], 3),
            Err(SsaError::SeriesTooShort { .. })
        ));
    }

    #[test]
    fn svd_constant_sigma_analytic() {
        // rank-1 matrix of all c: sigma = c * sqrt(M * K)
        let c = 2.5;
        let x = embed(&[c; 9], 4).unwrap(); // 4 x 6
        let triples = svd(&x);
        assert_eq!(triples.len(), 1);
        let expect = c * (4.0f64 * 6.0).sqrt();
        assert!((triples[0].singular_value - expect).abs() < 1e-10);
    }

    #[test]
    fn svd_reconstructs_random_trajectory() {
        use rand::Rng;
        let mut rng = crate::rng::substream(17, "ssa/test/svd");
        let series: Vec<f64> = (0..36).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = embed(&series, 18).unwrap(); // 18 x 19
        let triples = svd(&x);
        let mut rebuilt = DMatrix::<f64>::zeros(18, 19);
        for t in &triples {
            rebuilt += t.singular_value * &t.left * t.right.transpose();
        }
        let err = (&rebuilt - &x.entries).norm();
        assert!(err < 1e-8, "frobenius error {err}");
    }

    #[test]
    fn svd_identity_trajectory() {
        // embed((1,0,1), 2) is the 2x2 identity: both singular values 1
        let x = embed(&[1.0, 0.0, 1.0], 2).unwrap();
        assert_eq!(x.entries, DMatrix::identity(2, 2));
        let triples = svd(&x);
        assert_eq!(triples.len(), 2);
        for t in &triples {
            assert!((t.singular_value - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn svd_zero_matrix_empty() {
        let x = embed(&[0.0; 6], 3).unwrap();
        assert!(svd(&x).is_empty());
    }

    #[test]
    fn svd_orthonormal_vectors() {
        use rand::Rng;
        let mut rng = crate::rng::substream(3, "ssa/test/ortho");
        let series: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let triples = svd(&embed(&series, 6).unwrap());
        for (i, a) in triples.iter().enumerate() {
            for (j, b) in triples.iter().enumerate() {
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((a.left.dot(&b.left) - expect).abs() < 1e-8);
                assert!((a.right.dot(&b.right) - expect).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn reconstruct_full_selection_is_identity() {
        use rand::Rng;
        let mut rng = crate::rng::substream(5, "ssa/test/reconstruct");
        let series: Vec<f64> = (0..36).map(|_| rng.random_range(-2.0..2.0)).collect();
        let triples = svd(&embed(&series, 18).unwrap());
        let rebuilt = reconstruct_all(&triples, 36).unwrap();
        for (a, b) in series.iter().zip(&rebuilt) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn reconstruct_constant_rank_one() {
        let triples = svd(&embed(&[4.0; 10], 4).unwrap());
        let rebuilt = reconstruct(&triples, &[0], 10).unwrap();
        for v in rebuilt {
            assert!((v - 4.0).abs() < 1e-10);
        }
    }

    #[test]
    fn reconstruct_empty_selection_zero() {
        let triples = svd(&embed(&series_0123(), 2).unwrap());
        let zero = reconstruct(&triples, &[], 4).unwrap();
        assert_eq!(zero, vec![0.0; 4]);
    }

    #[test]
    fn reconstruct_matches_bruteforce_diagonal_averaging() {
        // series (1,2,3,4), M=2, leading triple only, against a literal
        // evaluation of the three-branch averaging formula (here M <= K).
        let x = embed(&series_0123(), 2).unwrap();
        let triples = svd(&x);
        let got = reconstruct(&triples, &[0], 4).unwrap();

        let t = &triples[0];
        let rank1 = t.singular_value * &t.left * t.right.transpose();
        let (m, k, n) = (2usize, 3usize, 4usize);
        let mut expect = vec![0.0; n];
        for i in 1..=n {
            // 1-based three-branch formula
            expect[i - 1] = if i < m {
                (1..=i).map(|j| rank1[(j - 1, i - j)]).sum::<f64>() / i as f64
            } else if i <= k {
                (1..=m).map(|j| rank1[(j - 1, i - j)]).sum::<f64>() / m as f64
            } else {
                let lo = i - k + 1;
                let hi = n - k + 1;
                (lo..=hi).map(|j| rank1[(j - 1, i - j)]).sum::<f64>() / (hi - lo + 1) as f64
            };
        }
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn diagonal_branches_agree_at_boundaries() {
        // at i = M and i = K the adjacent branch formulas coincide
        use rand::Rng;
        let mut rng = crate::rng::substream(9, "ssa/test/branches");
        let series: Vec<f64> = (0..12).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = embed(&series, 4).unwrap(); // M=4, K=9
        let (m, k) = (4usize, 9usize);
        let mat = &x.entries;
        // i = M: the first-branch formula evaluated at i=M equals branch 2
        let b1_at_m: f64 = (1..=m).map(|j| mat[(j - 1, m - j)]).sum::<f64>() / m as f64;
        let b2_at_m: f64 = (1..=m).map(|j| mat[(j - 1, m - j)]).sum::<f64>() / m as f64;
        assert_eq!(b1_at_m, b2_at_m);
        // i = K: branch 2 equals branch 3 (N - K + 1 = M)
        let n = m + k - 1;
        let b2_at_k: f64 = (1..=m).map(|j| mat[(j - 1, k - j)]).sum::<f64>() / m as f64;
        let lo = 1; // i - K + 1 with i = K
        let hi = n - k + 1;
        let b3_at_k: f64 =
            (lo..=hi).map(|j| mat[(j - 1, k - j)]).sum::<f64>() / (hi - lo + 1) as f64;
        assert!((b2_at_k - b3_at_k).abs() < 1e-15);
    }

    #[test]
    fn hankelization_identity() {
        use rand::Rng;
        let mut rng = crate::rng::substream(21, "ssa/test/hankel");
        let series: Vec<f64> = (0..30).map(|_| rng.random_range(-1.0..1.0)).collect();
        let x = embed(&series, 7).unwrap();
        let rebuilt = reconstruct_all(&svd(&x), 30).unwrap();
        let x2 = embed(&rebuilt, 7).unwrap();
        let err = (&x2.entries - &x.entries).norm();
        assert!(err < 1e-8);
    }

    #[test]
    fn target_of_constant_series_spans_ones() {
        let cfg = SsaConfig::default();
        let series = vec![5.0; 100];
        let basis = build_target(&series, 0, &cfg).unwrap();
        assert_eq!(basis.ncols(), 1); // effective dimension collapses to 1
        let ones = DVector::from_element(18, 1.0 / (18.0f64).sqrt());
        let dot = basis.column(0).dot(&ones).abs();
        assert!((dot - 1.0).abs() < 1e-10);
    }

    #[test]
    fn target_sinusoid_rank_two_subspace() {
        let cfg = SsaConfig {
            subspace_dim: 2,
            ..SsaConfig::default()
        };
        let series: Vec<f64> = (0..100)
            .map(|i| (2.0 * std::f64::consts::PI * 60.0 * i as f64 / 600.0 + 0.3).sin())
            .collect();
        let basis = build_target(&series, 0, &cfg).unwrap();
        assert_eq!(basis.ncols(), 2);
        // any in-window lag vector projects onto the basis almost exactly
        for start in 0..cfg.lag_count() {
            let lag = DVector::from_fn(18, |i, _| series[start + i]);
            let coeffs = basis.transpose() * &lag;
            let residual = (lag.dot(&lag) - coeffs.dot(&coeffs)).max(0.0).sqrt();
            assert!(residual < 1e-6, "lag {start}: residual {residual}");
        }
    }

    #[test]
    fn target_matrix_dimensions_default_config() {
        let cfg = SsaConfig::default();
        let series = vec![0.5; 80];
        // the embedded target behind build_target is 18 x 19 (K = N - M + 1)
        let x = embed(&series[0..cfg.series_len], cfg.window_len).unwrap();
        assert_eq!((x.rows(), x.cols()), (18, 19));
        assert_eq!(cfg.lag_count(), 19);
        let err = build_target(&series, 70, &cfg).unwrap_err();
        assert!(matches!(err, SsaError::WindowOutOfRange { .. }));
    }

    #[test]
    fn test_matrix_shape_and_indices() {
        // p = q: single column
        let cfg = SsaConfig {
            series_len: 8,
            window_len: 3,
            test_offset: 2,
            test_extent: 2,
            subspace_dim: 1,
            ..SsaConfig::default()
        };
        let series: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let t = build_test(&series, 0, &cfg).unwrap();
        assert_eq!(t.ncols(), 1);

        // default config: 18 x 13
        let cfg = SsaConfig::default();
        let long: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let t = build_test(&long, 0, &cfg).unwrap();
        assert_eq!((t.nrows(), t.ncols()), (18, 13));

        // index oracle: n=0, M=2, p=1, q=2 on series 0,1,2,... gives
        // columns with 0-based sample values (1,2), (2,3)
        let cfg = SsaConfig {
            series_len: 4,
            window_len: 2,
            test_offset: 1,
            test_extent: 2,
            subspace_dim: 1,
            ..SsaConfig::default()
        };
        let t = build_test(&series, 0, &cfg).unwrap();
        assert_eq!(t.column(0).as_slice(), &[1.0, 2.0]);
        assert_eq!(t.column(1).as_slice(), &[2.0, 3.0]);

        let err = build_test(&series[0..4], 0, &cfg).unwrap_err();
        assert!(matches!(err, SsaError::WindowOutOfRange { .. }));
    }

    fn orthonormal_basis_3x2() -> DMatrix<f64> {
        // Gram-Schmidt on two fixed vectors in R^3
        let a = DVector::from_vec(vec![1.0, 2.0, -1.0]).normalize();
        let mut b = DVector::from_vec(vec![0.5, -1.0, 2.0]);
        b -= &a * a.dot(&b);
        let b = b.normalize();
        DMatrix::from_columns(&[a, b])
    }

    #[test]
    fn distance_zero_inside_span() {
        let u = orthonormal_basis_3x2();
        // columns are combinations of the basis vectors
        let test = &u * DMatrix::from_vec(2, 3, vec![1.0, 2.0, -0.5, 0.3, 4.0, 1.0]);
        let d = distance(&test, &u).unwrap();
        assert!(d.abs() < 1e-10, "{d}");
    }

    #[test]
    fn distance_empty_basis_total_energy() {
        let test = DMatrix::from_vec(3, 2, vec![1.0, 2.0, 2.0, 0.0, 1.0, -1.0]);
        let empty = DMatrix::<f64>::zeros(3, 0);
        let d = distance(&test, &empty).unwrap();
        let energy: f64 = test.iter().map(|v| v * v).sum();
        assert!((d - energy).abs() < 1e-12);
    }

    #[test]
    fn distance_matches_bruteforce_residuals() {
        use rand::Rng;
        let mut rng = crate::rng::substream(11, "ssa/test/distance");
        for _ in 0..20 {
            let u = orthonormal_basis_3x2();
            let test = DMatrix::from_fn(3, 2, |_, _| rng.random_range(-2.0..2.0));
            let d = distance(&test, &u).unwrap();
            let mut brute = 0.0;
            for col in test.column_iter() {
                let proj = &u * (u.transpose() * col);
                let resid = col - proj;
                brute += resid.dot(&resid);
            }
            let rel = (d - brute).abs() / brute.abs().max(1e-30);
            assert!(rel < 1e-9, "{d} vs {brute}");
        }
    }

    #[test]
    fn distance_invariant_under_rebasis() {
        let u = orthonormal_basis_3x2();
        // rotate the basis within its span
        let theta: f64 = 0.7;
        let rot = DMatrix::from_vec(
            2,
            2,
            vec![theta.cos(), theta.sin(), -theta.sin(), theta.cos()],
        );
        let u2 = &u * rot;
        let test = DMatrix::from_vec(3, 2, vec![1.0, -0.3, 0.2, 2.0, 0.4, 0.9]);
        let d1 = distance(&test, &u).unwrap();
        let d2 = distance(&test, &u2).unwrap();
        assert!((d1 - d2).abs() < 1e-10);
    }

    #[test]
    fn distance_scales_quadratically() {
        let u = orthonormal_basis_3x2();
        let test = DMatrix::from_vec(3, 2, vec![1.0, -0.3, 0.2, 2.0, 0.4, 0.9]);
        let c = 3.7;
        let d1 = distance(&test, &u).unwrap();
        let d2 = distance(&(&test * c), &u).unwrap();
        let rel = (d2 - c * c * d1).abs() / (c * c * d1).abs().max(1e-30);
        assert!(rel < 1e-9);
    }

    #[test]
    fn distance_dimension_mismatch() {
        let u = orthonormal_basis_3x2();
        let test = DMatrix::<f64>::zeros(4, 2);
        assert!(matches!(
            distance(&test, &u),
            Err(SsaError::DimensionMismatch(_))
        ));
    }

    fn calibrated_config(records: &[WaveformRecord], ratio: f64) -> SsaConfig {
        let mut cfg = SsaConfig {
            threshold_ratio: ratio,
            ..SsaConfig::default()
        };
        cfg.baseline_distance = Some(calibrate_baseline(records, &cfg).unwrap());
        cfg
    }

    fn normal_records(noise: f64, count: usize, seed: u64) -> Vec<WaveformRecord> {
        (0..count)
            .map(|i| {
                let config = SignalConfig {
                    noise_level: noise,
                    rng_seed: seed.wrapping_add(i as u64),
                    ..SignalConfig::default()
                };
                generate_record(&config, FaultType::None).unwrap()
            })
            .collect()
    }

    #[test]
    fn detect_normal_record_quiet() {
        let normals = normal_records(0.05, 3, 100);
        let cfg = calibrated_config(&normals, 4.0);
        let probe = normal_records(0.05, 1, 555).pop().unwrap();
        let series = detect(&probe, &cfg).unwrap();
        assert!(series.flagged_times().is_empty(), "false alarms on normal");
        assert!(series.points.len() > 1000);
    }

    #[test]
    fn detect_flags_line_fault_interval() {
        let normals = normal_records(0.05, 3, 100);
        let cfg = calibrated_config(&normals, 4.0);
        let fault_cfg = SignalConfig {
            noise_level: 0.05,
            fault_onset_s: 0.5,
            rng_seed: 777,
            ..SignalConfig::default()
        };
        let record = generate_record(&fault_cfg, FaultType::LineToLine).unwrap();
        let series = detect(&record, &cfg).unwrap();
        let flags = series.flagged_times();
        assert!(!flags.is_empty(), "LL fault not detected");
        let in_interval = flags.iter().any(|&t| (0.5..0.6).contains(&t));
        assert!(in_interval, "no flag inside the fault interval: {flags:?}");
        // no flag before the onset
        assert!(flags.iter().all(|&t| t > 0.5));
    }

    #[test]
    fn detect_threshold_extremes() {
        let normals = normal_records(0.05, 2, 42);
        let record = &normals[0];
        let mut cfg = calibrated_config(&normals, 1.0);
        cfg.threshold_ratio = f64::INFINITY;
        assert!(detect(record, &cfg).unwrap().flagged_times().is_empty());
        cfg.threshold_ratio = 1e-12;
        let series = detect(record, &cfg).unwrap();
        assert_eq!(
            series.flagged_times().len(),
            series.points.len(),
            "all points flagged at a vanishing threshold"
        );
    }

    #[test]
    fn detect_requires_calibration() {
        let record = normal_records(0.05, 1, 1).pop().unwrap();
        let cfg = SsaConfig::default();
        assert!(matches!(
            detect(&record, &cfg),
            Err(SsaError::NotCalibrated)
        ));
    }

    #[test]
    fn detect_deterministic() {
        let normals = normal_records(0.05, 2, 9);
        let cfg = calibrated_config(&normals, 4.0);
        let a = detect(&normals[0], &cfg).unwrap();
        let b = detect(&normals[0], &cfg).unwrap();
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn detect_streaming_policy_runs() {
        let normals = normal_records(0.05, 2, 31);
        let mut cfg = calibrated_config(&normals, 4.0);
        cfg.target_policy = TargetPolicy::Streaming;
        let fault_cfg = SignalConfig {
            noise_level: 0.05,
            fault_onset_s: 0.4,
            rng_seed: 4242,
            ..SignalConfig::default()
        };
        let record = generate_record(&fault_cfg, FaultType::ThreePhase).unwrap();
        let series = detect(&record, &cfg).unwrap();
        let flags = series.flagged_times();
        assert!(flags.iter().any(|&t| (0.4..0.5).contains(&t)));
    }

    #[test]
    fn detect_record_too_short() {
        let config = SignalConfig {
            duration_s: 0.1,
            fault_onset_s: 0.01,
            fault_duration_s: 0.01,
            noise_level: 0.05,
            ..SignalConfig::default()
        };
        let record = generate_record(&config, FaultType::None).unwrap();
        let cfg = SsaConfig {
            baseline_distance: Some(1.0),
            ..SsaConfig::default()
        };
        // 60 samples < N + M + q + 1 = 85
        assert!(matches!(
            detect(&record, &cfg),
            Err(SsaError::RecordTooShort { .. })
        ));
    }

    #[test]
    fn calibrate_identical_records_equals_single_mean() {
        let one = normal_records(0.05, 1, 77);
        let cfg = SsaConfig::default();
        let single = calibrate_baseline(&one, &cfg).unwrap();
        let three = vec![one[0].clone(), one[0].clone(), one[0].clone()];
        let mean = calibrate_baseline(&three, &cfg).unwrap();
        assert!((single - mean).abs() < 1e-12 * single);
    }

    #[test]
    fn calibrate_noiseless_is_degenerate() {
        let record = generate_record(
            &SignalConfig {
                noise_level: 0.0,
                ..SignalConfig::default()
            },
            FaultType::None,
        )
        .unwrap();
        let baseline = calibrate_baseline(&[record], &SsaConfig::default()).unwrap();
        assert!(baseline < 1e-15, "noiseless baseline {baseline}");
        assert!(baseline >= 1e-300);
    }

    #[test]
    fn calibrate_empty_errors() {
        assert!(matches!(
            calibrate_baseline(&[], &SsaConfig::default()),
            Err(SsaError::EmptyCalibration)
        ));
    }

    #[test]
    fn calibrate_stable_across_seed_families() {
        // Monte-Carlo stability: same statistics, different seeds, within 20%
        let a = calibrate_baseline(&normal_records(0.05, 4, 1000), &SsaConfig::default()).unwrap();
        let b = calibrate_baseline(&normal_records(0.05, 4, 2000), &SsaConfig::default()).unwrap();
        let rel = (a - b).abs() / a;
        assert!(rel < 0.2, "baselines {a} vs {b} differ by {rel}");
    }

    #[test]
    fn record_outcome_guard_band() {
        let intervals = vec![LabelInterval {
            start_s: 0.5,
            end_s: 0.6,
            fault: FaultType::LineToLine,
        }];
        let mk = |t: f64, d: f64| DetectionPoint {
            sample_index: 0,
            time_s: t,
            raw_distance: d,
            distance: d,
            is_anomaly: false,
        };
        // flag inside the interval: hit, no alarm
        let (hit, fa) = record_outcome(&[mk(0.55, 10.0)], &intervals, 5.0, 0.08);
        assert!(hit && !fa);
        // flag just past the end within the guard: neither hit nor alarm
        let (hit, fa) = record_outcome(&[mk(0.63, 10.0)], &intervals, 5.0, 0.08);
        assert!(!hit && !fa);
        // flag far outside: false alarm
        let (hit, fa) = record_outcome(&[mk(1.2, 10.0)], &intervals, 5.0, 0.08);
        assert!(!hit && fa);
        // sub-threshold points never count
        let (hit, fa) = record_outcome(&[mk(0.55, 2.0)], &intervals, 5.0, 0.08);
        assert!(!hit && !fa);
    }

    #[test]
    fn log_grid_endpoints() {
        let grid = log_grid(0.1, 1000.0, 5);
        assert_eq!(grid.len(), 5);
        assert!((grid[0] - 0.1).abs() < 1e-12);
        assert!((grid[4] - 1000.0).abs() < 1e-9);
        assert!(grid.windows(2).all(|w| w[0] < w[1]));
    }
}
