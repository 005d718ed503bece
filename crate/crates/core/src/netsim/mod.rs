//! Discrete-event simulation of a wide-area PMU network with DiffServ QoS.
//!
//! Seven PMU substations stream 112-byte measurement frames at 30 frames/s
//! toward a phasor data concentrator behind two core subnets. Substation-side
//! detectors promote anomalous stretches to the expedited-forwarding class;
//! weighted fair queueing on every output port then gives those frames most
//! of the link during contention. Three scenarios vary the WAN: 10 Mbps
//! dedicated, 100 Mbps dedicated, and 100 Mbps shared with a 45 Mbps
//! background load. A small constant management-traffic floor rides on every
//! WAN link in all scenarios, standing in for the control-plane chatter of a
//! production utility network; it is what QoS competes against on otherwise
//! dedicated links, and it is configurable down to zero for a strictly idle
//! network.

pub mod fog;
pub mod pdc;
pub mod sim;
pub mod topology;
pub mod wfq;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::frame_codec::FRAME_LEN;
use crate::rng::substream;
use crate::signalgen::{self, SignalConfig, WaveformRecord};

pub use fog::{anomaly_spans, fog_mark, Detector, FrameMark};
pub use pdc::{pdc_align, AlignmentReport, Arrival, SlotAlignment};
pub use sim::{
    run_planned, CbrFlow, Counters, FramePlan, HopLog, PacketLog, ReleaseCause, ReleaseLog,
    SimInputs, SimOutput,
};
pub use topology::{Link, LinkId, Node, NodeId, NodeKind, Topology, TopologyParams};
pub use wfq::{TrafficClass, WfqParams, WfqPort};

#[derive(Debug, Error)]
pub enum NetsimError {
    #[error("bad topology: {0}")]
    BadTopology(String),
    #[error("bad scenario: {0}")]
    BadScenario(String),
    #[error("duplicate frame for PMU {pmu} at timestamp {timestamp_s}")]
    DuplicateArrival { pmu: usize, timestamp_s: f64 },
    #[error("packet conservation violated: {0}")]
    ConservationViolated(String),
    #[error("ssa detector: {0}")]
    Ssa(#[from] crate::ssa::SsaError),
    #[error("knn detector: {0}")]
    Knn(#[from] crate::knn::KnnError),
    #[error("signal generation: {0}")]
    Signal(#[from] crate::signalgen::SignalError),
}

/// Which detector marks traffic at the substations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorChoice {
    #[default]
    Oracle,
    Ssa,
    Knn,
}

/// One simulation configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// 1 = 10 Mbps dedicated, 2 = 100 Mbps dedicated, 3 = 100 Mbps with
    /// 45 Mbps background load.
    pub id: u8,
    pub wan_bandwidth_bps: f64,
    pub background_bps: f64,
    /// Management-traffic floor per WAN link, all scenarios.
    pub cross_traffic_bps: f64,
    pub qos_enabled: bool,
    pub detector: DetectorChoice,
    pub duration_s: f64,
    pub seed: u64,
    /// Concentrator release timeout.
    pub timeout_s: f64,
    /// PMU processing jitter bound; emission = timestamp + U[0, jitter).
    pub emission_jitter_s: f64,
    /// Management-traffic train length (packets per burst).
    pub cross_burst_len: usize,
    /// Expedited marking persists this long past the last flagged window.
    pub hold_time_s: f64,
    pub frame_rate_hz: f64,
    /// Ethernet + IP + UDP framing added to each 112-byte payload.
    pub overhead_bytes: usize,
    pub background_packet_bytes: usize,
    pub epoch_soc: u32,
    pub wfq: WfqParams,
}

impl Scenario {
    pub fn frame_wire_bytes(&self) -> usize {
        FRAME_LEN + self.overhead_bytes
    }

    pub fn expected_ticks(&self) -> u64 {
        (self.duration_s * self.frame_rate_hz).round() as u64
    }
}

/// Optional knobs on top of a numbered scenario.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ScenarioOverrides {
    pub seed: Option<u64>,
    pub qos_enabled: Option<bool>,
    pub detector: Option<DetectorChoice>,
    pub duration_s: Option<f64>,
    pub timeout_s: Option<f64>,
    pub distances_km: Option<Vec<f64>>,
    pub cross_traffic_bps: Option<f64>,
    pub emission_jitter_s: Option<f64>,
    pub hold_time_s: Option<f64>,
    pub wfq: Option<WfqParams>,
}

/// Build the topology and scenario for one of the three numbered setups.
pub fn build_scenario(
    id: u8,
    overrides: &ScenarioOverrides,
) -> Result<(Topology, Scenario), NetsimError> {
    let (wan_bandwidth_bps, background_bps) = match id {
        1 => (10e6, 0.0),
        2 => (100e6, 0.0),
        3 => (100e6, 45e6),
        other => {
            return Err(NetsimError::BadScenario(format!(
                "unknown scenario id {other} (expected 1, 2, or 3)"
            )))
        }
    };
    let scenario = Scenario {
        id,
        wan_bandwidth_bps,
        background_bps,
        cross_traffic_bps: overrides.cross_traffic_bps.unwrap_or(2e6),
        qos_enabled: overrides.qos_enabled.unwrap_or(true),
        detector: overrides.detector.unwrap_or_default(),
        duration_s: overrides.duration_s.unwrap_or(2.0),
        seed: overrides.seed.unwrap_or(0),
        timeout_s: overrides.timeout_s.unwrap_or(0.010),
        emission_jitter_s: overrides.emission_jitter_s.unwrap_or(0.002),
        cross_burst_len: 4,
        hold_time_s: overrides.hold_time_s.unwrap_or(0.2),
        frame_rate_hz: 30.0,
        overhead_bytes: 54,
        background_packet_bytes: 1500,
        epoch_soc: 0,
        wfq: overrides.wfq.unwrap_or_default(),
    };
    let mut params = TopologyParams {
        wan_bandwidth_bps,
        ..TopologyParams::default()
    };
    if let Some(distances) = &overrides.distances_km {
        params.distances_km = distances.clone();
        params.pmu_count = distances.len();
    }
    let topology = Topology::build(&params)?;
    Ok((topology, scenario))
}

/// Shared-traffic sources for a scenario: the management floor plus, in
/// scenario 3, the 45 Mbps background stream on every WAN link.
///
/// Both ride the default assured-forwarding class, like any other data on
/// the utility network; only fog-marked measurement frames sit above them.
/// The management floor arrives in short trains so that standing queues
/// exist for the expedited class to bypass.
pub fn scenario_flows(topology: &Topology, scenario: &Scenario) -> Vec<CbrFlow> {
    let mut flows = Vec::new();
    for link in topology.wan_links() {
        for (label, rate, burst) in [
            ("cross", scenario.cross_traffic_bps, scenario.cross_burst_len),
            ("background", scenario.background_bps, 1),
        ] {
            if rate <= 0.0 {
                continue;
            }
            let burst = burst.max(1);
            let interval = (burst * scenario.background_packet_bytes) as f64 * 8.0 / rate;
            let mut rng = substream(scenario.seed, &format!("sim/{label}/{}", link.name));
            let phase = rng.random_range(0.0..interval);
            flows.push(CbrFlow {
                link: link.id,
                rate_bps: rate,
                packet_bytes: scenario.background_packet_bytes,
                phase_s: phase,
                class: TrafficClass::Af23,
                burst_len: burst,
            });
        }
    }
    flows
}

/// Expand per-frame marks into emission plans with processing jitter.
///
/// Jitter is drawn from a substream keyed only by seed and PMU, so runs that
/// differ in QoS setting or bandwidth see identical emission times.
pub fn plan_frames(
    scenario: &Scenario,
    records: &[WaveformRecord],
    marks: &[Vec<FrameMark>],
) -> Result<Vec<Vec<FramePlan>>, NetsimError> {
    let n_frames = scenario.expected_ticks() as usize;
    let mut plans = Vec::with_capacity(records.len());
    for (pmu, (record, record_marks)) in records.iter().zip(marks).enumerate() {
        if record_marks.len() < n_frames {
            return Err(NetsimError::BadScenario(format!(
                "PMU {} has {} frame marks for {} ticks",
                pmu + 1,
                record_marks.len(),
                n_frames
            )));
        }
        let mut jitter_rng = substream(scenario.seed, &format!("sim/jitter/pmu{}", pmu + 1));
        let rate = record.sample_rate_hz();
        let mut plan = Vec::with_capacity(n_frames);
        for mark in record_marks.iter().take(n_frames) {
            let jitter = if scenario.emission_jitter_s > 0.0 {
                jitter_rng.random_range(0.0..scenario.emission_jitter_s)
            } else {
                0.0
            };
            let sample_index =
                ((mark.timestamp_s * rate).round() as usize).min(record.samples.len() - 1);
            plan.push(FramePlan {
                seq: mark.seq,
                ts: mark.timestamp_s,
                created_s: mark.timestamp_s + jitter,
                class: mark.class,
                anomaly: mark.anomaly,
                sample_value: record.samples[sample_index].1,
            });
        }
        plans.push(plan);
    }
    Ok(plans)
}

/// Mark, plan, and run one scenario over the given per-PMU streams.
pub fn run(
    topology: &Topology,
    scenario: &Scenario,
    records: &[WaveformRecord],
    detector: &Detector,
) -> Result<SimOutput, NetsimError> {
    if records.len() != topology.pmu_nodes.len() {
        return Err(NetsimError::BadScenario(format!(
            "{} streams for {} PMUs",
            records.len(),
            topology.pmu_nodes.len()
        )));
    }
    for (pmu, record) in records.iter().enumerate() {
        if record.config_echo.duration_s + 1e-9 < scenario.duration_s {
            return Err(NetsimError::BadScenario(format!(
                "PMU {} stream covers {}s, scenario needs {}s",
                pmu + 1,
                record.config_echo.duration_s,
                scenario.duration_s
            )));
        }
    }
    let mut marks = Vec::with_capacity(records.len());
    for record in records {
        marks.push(fog::fog_mark(
            detector,
            record,
            scenario.hold_time_s,
            scenario.frame_rate_hz,
            scenario.qos_enabled,
        )?);
    }
    let plans = plan_frames(scenario, records, &marks)?;
    let inputs = SimInputs {
        plans,
        flows: scenario_flows(topology, scenario),
        timeout_s: scenario.timeout_s,
        frame_wire_bytes: scenario.frame_wire_bytes(),
        overhead_bytes: scenario.overhead_bytes,
        wfq: scenario.wfq,
        epoch_soc: scenario.epoch_soc,
        frame_rate_hz: scenario.frame_rate_hz,
        duration_s: scenario.duration_s,
    };
    run_planned(topology, &inputs)
}

/// Default per-PMU measurement streams: each substation sees one fault of a
/// cycled type and onset, at the given noise level.
pub fn default_pmu_streams(
    pmu_count: usize,
    duration_s: f64,
    noise_level: f64,
    seed: u64,
) -> Result<Vec<WaveformRecord>, NetsimError> {
    use crate::signalgen::{FaultType, ONSET_CYCLE_S};
    let mut records = Vec::with_capacity(pmu_count);
    for pmu in 0..pmu_count {
        let fault = FaultType::FAULTS[pmu % FaultType::FAULTS.len()];
        let onset = ONSET_CYCLE_S[pmu % ONSET_CYCLE_S.len()];
        let mut rng = substream(seed, &format!("sim/stream/pmu{}", pmu + 1));
        let record_seed: u64 = rng.random();
        let config = SignalConfig {
            duration_s,
            fault_onset_s: onset,
            noise_level,
            rng_seed: record_seed,
            ..SignalConfig::default()
        };
        records.push(signalgen::generate_record(&config, fault)?);
    }
    Ok(records)
}
