//! Concentrator timestamp alignment.
//!
//! The PDC gathers the frames of one measurement timestamp into a set and
//! releases the set either when all PMUs have reported or when the timeout
//! expires, whichever comes first. The timeout deadline is anchored at the
//! frame's measurement timestamp. Per-PMU waits follow the two-branch
//! closed form: with every report in hand before the deadline each PMU
//! waits until the slowest one (`theta - wan_i`), otherwise it waits out
//! the timeout (`t_to - wan_i`, floored at zero; later frames are missing).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::NetsimError;

/// One frame reaching the concentrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Arrival {
    pub pmu: usize,
    pub timestamp_s: f64,
    pub arrival_s: f64,
}

/// Alignment outcome for one measurement timestamp.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotAlignment {
    pub timestamp_s: f64,
    pub release_s: f64,
    /// Frame present at release time, per PMU.
    pub present: Vec<bool>,
    /// PDC wait per PMU; `None` when the frame never arrived.
    pub waits_s: Vec<Option<f64>>,
    pub complete: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentReport {
    pub t_to: f64,
    pub pmu_count: usize,
    pub slots: Vec<SlotAlignment>,
}

impl AlignmentReport {
    /// Fraction of (timestamp, PMU) measurement slots present at release.
    pub fn completeness(&self) -> f64 {
        let total = self.slots.len() * self.pmu_count;
        if total == 0 {
            return 1.0;
        }
        let present: usize = self
            .slots
            .iter()
            .map(|s| s.present.iter().filter(|p| **p).count())
            .sum();
        present as f64 / total as f64
    }
}

/// Align arrivals by timestamp against a `t_to` timeout.
pub fn pdc_align(
    arrivals: &[Arrival],
    pmu_count: usize,
    t_to: f64,
) -> Result<AlignmentReport, NetsimError> {
    let mut slots: BTreeMap<u64, Vec<Option<f64>>> = BTreeMap::new();
    for a in arrivals {
        if a.pmu >= pmu_count {
            return Err(NetsimError::BadScenario(format!(
                "arrival for PMU {} with only {pmu_count} PMUs",
                a.pmu
            )));
        }
        let slot = slots
            .entry(a.timestamp_s.to_bits())
            .or_insert_with(|| vec![None; pmu_count]);
        if slot[a.pmu].is_some() {
            return Err(NetsimError::DuplicateArrival {
                pmu: a.pmu,
                timestamp_s: a.timestamp_s,
            });
        }
        slot[a.pmu] = Some(a.arrival_s);
    }
    let mut out = Vec::with_capacity(slots.len());
    for (ts_bits, arrived) in slots {
        let ts = f64::from_bits(ts_bits);
        let wan: Vec<Option<f64>> = arrived.iter().map(|a| a.map(|t| t - ts)).collect();
        let all_arrived = wan.iter().all(|w| w.is_some());
        let theta = wan
            .iter()
            .flatten()
            .cloned()
            .fold(f64::NEG_INFINITY, f64::max);
        let full_before_deadline = all_arrived && theta < t_to;
        let release_s = if full_before_deadline {
            ts + theta
        } else {
            ts + t_to
        };
        let mut present = vec![false; pmu_count];
        let mut waits = vec![None; pmu_count];
        for (i, w) in wan.iter().enumerate() {
            let Some(w) = *w else { continue };
            if full_before_deadline {
                present[i] = true;
                waits[i] = Some(theta - w);
            } else if w <= t_to {
                present[i] = true;
                waits[i] = Some((t_to - w).max(0.0));
            } else {
                // late frame: counted missing, no useful wait
                waits[i] = Some(0.0);
            }
        }
        let complete = present.iter().all(|p| *p);
        out.push(SlotAlignment {
            timestamp_s: ts,
            release_s,
            present,
            waits_s: waits,
            complete,
        });
    }
    Ok(AlignmentReport {
        t_to,
        pmu_count,
        slots: out,
    })
}
