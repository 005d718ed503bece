//! Delay statistics, completeness curves, and report rendering over
//! simulation logs.
//!
//! The end-to-end delay of a PMU is the mean transmission delay of its
//! frames to the concentrator plus the mean forwarding delay of released
//! sets to the application server (uniform across PMUs). Alignment waits
//! are reported alongside but kept out of the transmission total.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::netsim::{pdc_align, Counters, NetsimError, Scenario, SimOutput};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("event log contains no delivered packets")]
    EmptyLog,
    #[error("timeout values must be nonnegative, got {0}")]
    NegativeTimeout(f64),
    #[error("mismatched runs: {0}")]
    MismatchedRuns(String),
    #[error("alignment: {0}")]
    Alignment(#[from] NetsimError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Per-PMU end-to-end delay statistics, milliseconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayStats {
    pub pmu: usize,
    pub frames: usize,
    /// Mean ETE transmission delay: WAN term plus forward term.
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p99_ms: f64,
    /// Mean PMU-to-concentrator delay.
    pub mean_wan_ms: f64,
    /// Mean concentrator-to-server forwarding delay (uniform per run).
    pub mean_forward_ms: f64,
    /// Mean alignment wait at the concentrator, reported for analysis and
    /// excluded from the transmission total.
    pub mean_align_wait_ms: f64,
}

/// One point of a completeness-vs-timeout curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CompletenessPoint {
    pub t_to_s: f64,
    pub fraction: f64,
}

fn percentile(sorted: &[f64], fraction: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let rank = ((sorted.len() as f64 * fraction).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

/// Per-PMU delay statistics from one run's event log.
pub fn ete_delay(output: &SimOutput) -> Result<Vec<DelayStats>, MetricsError> {
    if output.packets.iter().all(|p| p.delivered_s.is_none()) {
        return Err(MetricsError::EmptyLog);
    }
    let forward_s = output.mean_forward_delay_s();
    let align = pdc_align(&output.arrivals(), output.pmu_count, output.timeout_s)?;
    let mut align_sums = vec![(0.0f64, 0usize); output.pmu_count];
    for slot in &align.slots {
        for (pmu, wait) in slot.waits_s.iter().enumerate() {
            if let Some(w) = wait {
                align_sums[pmu].0 += w;
                align_sums[pmu].1 += 1;
            }
        }
    }
    let mut stats = Vec::with_capacity(output.pmu_count);
    for pmu in 0..output.pmu_count {
        let mut wan: Vec<f64> = output
            .packets
            .iter()
            .filter(|p| p.pmu == pmu)
            .filter_map(|p| p.delivered_s.map(|d| d - p.created_s))
            .collect();
        wan.sort_by(|a, b| a.total_cmp(b));
        let frames = wan.len();
        let mean_wan = if frames == 0 {
            0.0
        } else {
            wan.iter().sum::<f64>() / frames as f64
        };
        let (mean_align, align_n) = align_sums[pmu];
        stats.push(DelayStats {
            pmu,
            frames,
            mean_ms: (mean_wan + forward_s) * 1e3,
            median_ms: (percentile(&wan, 0.5) + forward_s) * 1e3,
            p99_ms: (percentile(&wan, 0.99) + forward_s) * 1e3,
            mean_wan_ms: mean_wan * 1e3,
            mean_forward_ms: forward_s * 1e3,
            mean_align_wait_ms: if align_n == 0 {
                0.0
            } else {
                mean_align / align_n as f64 * 1e3
            },
        });
    }
    Ok(stats)
}

/// Completeness over a sweep of timeout values: the fraction of
/// (timestamp, PMU) slots whose frame reached the concentrator within
/// `ts + t_to`. Monotone non-decreasing in the timeout by construction.
pub fn completeness(
    output: &SimOutput,
    t_tos: &[f64],
) -> Result<Vec<CompletenessPoint>, MetricsError> {
    for &t in t_tos {
        if t < 0.0 {
            return Err(MetricsError::NegativeTimeout(t));
        }
    }
    let total_slots = (output.expected_ticks as usize) * output.pmu_count;
    let points = t_tos
        .iter()
        .map(|&t_to| {
            let present = output
                .packets
                .iter()
                .filter(|p| {
                    p.delivered_s
                        .map(|d| d <= p.measurement_ts + t_to)
                        .unwrap_or(false)
                })
                .count();
            CompletenessPoint {
                t_to_s: t_to,
                fraction: if total_slots == 0 {
                    1.0
                } else {
                    present as f64 / total_slots as f64
                },
            }
        })
        .collect();
    Ok(points)
}

/// Everything measured from one scenario run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioResult {
    pub scenario: Scenario,
    pub per_pmu: Vec<DelayStats>,
    pub completeness: Vec<CompletenessPoint>,
    pub counters: Counters,
}

/// Post-process one run into a result record.
pub fn summarize_run(
    scenario: &Scenario,
    output: &SimOutput,
    t_tos: &[f64],
) -> Result<ScenarioResult, MetricsError> {
    let per_pmu = if output.packets.is_empty() {
        Vec::new()
    } else {
        ete_delay(output)?
    };
    Ok(ScenarioResult {
        scenario: scenario.clone(),
        per_pmu,
        completeness: completeness(output, t_tos)?,
        counters: output.counters,
    })
}

/// Pass/fail of the report-level consistency properties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportProperties {
    pub conservation_ok: bool,
    pub completeness_monotone: bool,
    /// With both QoS settings present: mean delay with QoS is no worse for
    /// every PMU.
    pub qos_delay_dominance: Option<bool>,
    /// With both settings present: QoS completeness curve is pointwise >=.
    pub qos_completeness_dominance: Option<bool>,
    /// Number of sweep points where the QoS curve is strictly better.
    pub qos_completeness_strict_points: Option<usize>,
}

impl ReportProperties {
    pub fn all_pass(&self) -> bool {
        self.conservation_ok
            && self.completeness_monotone
            && self.qos_delay_dominance.unwrap_or(true)
            && self.qos_completeness_dominance.unwrap_or(true)
    }
}

/// Rendered report artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportFiles {
    pub delay_table_csv: String,
    pub completeness_csv: String,
    pub summary_json: String,
    pub properties: ReportProperties,
}

fn check_monotone(points: &[CompletenessPoint]) -> bool {
    points
        .windows(2)
        .all(|w| w[1].fraction >= w[0].fraction - 1e-12)
}

/// Render the delay table (one row per PMU, one column per QoS setting),
/// the completeness curves, and a JSON summary with property pass/fails.
///
/// Accepts one run or a {no-QoS, QoS} pair of the same scenario id.
pub fn render_report(runs: &[ScenarioResult]) -> Result<ReportFiles, MetricsError> {
    if runs.is_empty() || runs.len() > 2 {
        return Err(MetricsError::MismatchedRuns(format!(
            "expected 1 or 2 runs, got {}",
            runs.len()
        )));
    }
    let mut by_qos: BTreeMap<bool, &ScenarioResult> = BTreeMap::new();
    for run in runs {
        if by_qos.insert(run.scenario.qos_enabled, run).is_some() {
            return Err(MetricsError::MismatchedRuns(
                "two runs with the same QoS setting".into(),
            ));
        }
    }
    if runs.len() == 2 && runs[0].scenario.id != runs[1].scenario.id {
        return Err(MetricsError::MismatchedRuns(
            "paired runs must share a scenario id".into(),
        ));
    }
    let without = by_qos.get(&false).copied();
    let with = by_qos.get(&true).copied();

    let mut delay_table = String::from("pmu,no_qos_ms,qos_ms\n");
    let pmu_count = runs[0].per_pmu.len();
    for pmu in 0..pmu_count {
        let cell = |run: Option<&ScenarioResult>| {
            run.and_then(|r| r.per_pmu.get(pmu))
                .map(|s| format!("{:.4}", s.mean_ms))
                .unwrap_or_else(|| "-".into())
        };
        delay_table.push_str(&format!("{},{},{}\n", pmu + 1, cell(without), cell(with)));
    }

    let mut completeness_csv = String::from("t_to_ms,no_qos,qos\n");
    let curve_len = runs[0].completeness.len();
    for i in 0..curve_len {
        let t_to = runs[0].completeness[i].t_to_s;
        let cell = |run: Option<&ScenarioResult>| {
            run.and_then(|r| r.completeness.get(i))
                .map(|p| p.fraction.to_string())
                .unwrap_or_else(|| "-".into())
        };
        completeness_csv.push_str(&format!(
            "{},{},{}\n",
            t_to * 1e3,
            cell(without),
            cell(with)
        ));
    }

    let conservation_ok = runs.iter().all(|r| r.counters.conserved());
    let completeness_monotone = runs.iter().all(|r| check_monotone(&r.completeness));
    let qos_delay_dominance = match (without, with) {
        (Some(a), Some(b)) => Some(
            a.per_pmu
                .iter()
                .zip(&b.per_pmu)
                .all(|(off, on)| on.mean_ms <= off.mean_ms),
        ),
        _ => None,
    };
    let (qos_completeness_dominance, qos_completeness_strict_points) = match (without, with) {
        (Some(a), Some(b)) => {
            let pointwise = a
                .completeness
                .iter()
                .zip(&b.completeness)
                .all(|(off, on)| on.fraction >= off.fraction - 1e-12);
            let strict = a
                .completeness
                .iter()
                .zip(&b.completeness)
                .filter(|(off, on)| on.fraction > off.fraction + 1e-12)
                .count();
            (Some(pointwise), Some(strict))
        }
        _ => (None, None),
    };
    let properties = ReportProperties {
        conservation_ok,
        completeness_monotone,
        qos_delay_dominance,
        qos_completeness_dominance,
        qos_completeness_strict_points,
    };

    #[derive(Serialize)]
    struct Summary<'a> {
        properties: &'a ReportProperties,
        runs: &'a [ScenarioResult],
    }
    let summary_json = serde_json::to_string_pretty(&Summary {
        properties: &properties,
        runs,
    })
    .expect("summary serializes");

    Ok(ReportFiles {
        delay_table_csv: delay_table,
        completeness_csv,
        summary_json,
        properties,
    })
}

/// Write the rendered report into a directory.
pub fn write_report(files: &ReportFiles, dir: &Path) -> Result<(), MetricsError> {
    std::fs::create_dir_all(dir)?;
    let write = |name: &str, body: &str| -> Result<(), MetricsError> {
        let mut f = std::fs::File::create(dir.join(name))?;
        f.write_all(body.as_bytes())?;
        Ok(())
    };
    write("delay_table.csv", &files.delay_table_csv)?;
    write("completeness.csv", &files.completeness_csv)?;
    write("summary.json", &files.summary_json)?;
    Ok(())
}
