//! Record-level detection accuracy, shared by both detectors.
//!
//! A record scores a true positive when at least one flagged window or
//! detection point falls inside its labeled fault interval, and a false
//! positive when one fires on a normal segment outside every interval and
//! its guard band.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::signalgen::FaultType;

/// Per-class detection accuracy. `tpr` is `None` for the normal class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassAccuracy {
    pub records: usize,
    pub true_positives: usize,
    pub false_positives: usize,
    pub tpr: Option<f64>,
    pub fpr: f64,
}

/// Aggregate per-record `(fault, hit, false_alarm)` outcomes by class.
pub fn summarize(outcomes: &[(FaultType, bool, bool)]) -> BTreeMap<FaultType, ClassAccuracy> {
    let mut per_class: BTreeMap<FaultType, (usize, usize, usize)> = BTreeMap::new();
    for &(fault, hit, false_alarm) in outcomes {
        let entry = per_class.entry(fault).or_insert((0, 0, 0));
        entry.0 += 1;
        if fault != FaultType::None && hit {
            entry.1 += 1;
        }
        if false_alarm {
            entry.2 += 1;
        }
    }
    per_class
        .into_iter()
        .map(|(fault, (records, tp, fp))| {
            let tpr = if fault == FaultType::None {
                None
            } else {
                Some(tp as f64 / records as f64)
            };
            (
                fault,
                ClassAccuracy {
                    records,
                    true_positives: tp,
                    false_positives: fp,
                    tpr,
                    fpr: fp as f64 / records as f64,
                },
            )
        })
        .collect()
}
