//! Fog-side anomaly marking: decide per frame whether it leaves the
//! substation as expedited traffic.
//!
//! A detector flags anomalous stretches of the local measurement stream;
//! frames whose timestamps fall between the first flag and `hold_s` past the
//! last flag are marked. The frame payload is never altered beyond its
//! status bit; the priority travels out-of-band as the DiffServ class.

use crate::knn::{record_windows, KnnModel};
use crate::signalgen::WaveformRecord;
use crate::ssa::{self, SsaConfig};

use super::wfq::TrafficClass;
use super::NetsimError;

/// The anomaly detector running at the substation.
#[derive(Debug, Clone)]
pub enum Detector<'a> {
    /// Ground-truth labels pass through; the upper bound for marking.
    Oracle,
    /// Subspace-distance change-point detection (requires a calibrated
    /// baseline in the config).
    Ssa(&'a SsaConfig),
    /// Window-feature nearest-neighbor classification.
    Knn(&'a KnnModel),
}

/// Per-frame marking decision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameMark {
    pub seq: u64,
    pub timestamp_s: f64,
    pub anomaly: bool,
    pub class: TrafficClass,
}

use serde::{Deserialize, Serialize};

/// Merge point flags into closed intervals `[t, t + hold_s]` and union the
/// overlaps.
fn merge_intervals(mut spans: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    spans.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (lo, hi) in spans {
        match merged.last_mut() {
            Some(last) if lo <= last.1 => last.1 = last.1.max(hi),
            _ => merged.push((lo, hi)),
        }
    }
    merged
}

/// Anomalous time spans of a record according to the detector.
pub fn anomaly_spans(
    detector: &Detector,
    record: &WaveformRecord,
    hold_s: f64,
) -> Result<Vec<(f64, f64)>, NetsimError> {
    let spans = match detector {
        Detector::Oracle => record
            .label_intervals
            .iter()
            .map(|iv| (iv.start_s, iv.end_s + hold_s))
            .collect(),
        Detector::Ssa(cfg) => {
            let series = ssa::detect(record, cfg)?;
            series
                .points
                .iter()
                .filter(|p| p.is_anomaly)
                .map(|p| (p.time_s, p.time_s + hold_s))
                .collect()
        }
        Detector::Knn(model) => {
            let values = record.values();
            let mut spans = Vec::new();
            for span in record_windows(record, model.config.window_len) {
                let verdict = model.classify(&values[span.start..span.end])?;
                if verdict.is_fault {
                    spans.push((span.t_start, span.t_last + hold_s));
                }
            }
            spans
        }
    };
    Ok(merge_intervals(spans))
}

/// Mark every frame of a stream. Frames are emitted at `frame_rate_hz`
/// over the record duration; a frame is anomalous when its measurement
/// timestamp lies in a flagged span. With QoS disabled everything stays
/// in the assured-forwarding class (the status bit still records the
/// detection for auditing).
pub fn fog_mark(
    detector: &Detector,
    record: &WaveformRecord,
    hold_s: f64,
    frame_rate_hz: f64,
    qos_enabled: bool,
) -> Result<Vec<FrameMark>, NetsimError> {
    if !(frame_rate_hz > 0.0) {
        return Err(NetsimError::BadScenario(format!(
            "frame rate must be > 0, got {frame_rate_hz}"
        )));
    }
    let spans = anomaly_spans(detector, record, hold_s)?;
    let duration = record.config_echo.duration_s;
    let n_frames = (duration * frame_rate_hz).round() as u64;
    let marks = (0..n_frames)
        .map(|seq| {
            let ts = seq as f64 / frame_rate_hz;
            let anomaly = spans.iter().any(|&(lo, hi)| ts >= lo && ts <= hi);
            FrameMark {
                seq,
                timestamp_s: ts,
                anomaly,
                class: if anomaly && qos_enabled {
                    TrafficClass::Ef
                } else {
                    TrafficClass::Af23
                },
            }
        })
        .collect();
    Ok(marks)
}
