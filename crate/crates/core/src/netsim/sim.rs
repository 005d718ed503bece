//! Deterministic event-driven execution of one scenario.
//!
//! Three event sources feed the loop: PMU frame emissions (GPS-aligned
//! ticks plus a small processing jitter), constant-bit-rate shared-traffic
//! sources on the WAN links, and the concentrator's per-timestamp release
//! deadlines. Every output port runs weighted fair queueing; per-hop
//! enqueue, transmit, and arrival instants are recorded on each measurement
//! frame, so delays decompose exactly into queueing, serialization, and
//! propagation terms. Ties in the event queue break on insertion order,
//! which makes runs bit-reproducible.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::frame_codec::{self, DataFrame, FRAME_LEN};

use super::topology::{LinkId, NodeId, Topology};
use super::wfq::{TrafficClass, WfqParams, WfqPort};
use super::NetsimError;

/// Emission schedule entry for one measurement frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FramePlan {
    pub seq: u64,
    /// GPS measurement timestamp.
    pub ts: f64,
    /// Actual emission instant (timestamp plus processing jitter).
    pub created_s: f64,
    pub class: TrafficClass,
    pub anomaly: bool,
    /// Sample carried in the frame payload.
    pub sample_value: f64,
}

/// One shared-traffic source pinned to a single link: trains of
/// `burst_len` back-to-back packets at a constant average rate.
/// `burst_len = 1` gives a smooth constant bit rate.
#[derive(Debug, Clone, PartialEq)]
pub struct CbrFlow {
    pub link: LinkId,
    pub rate_bps: f64,
    pub packet_bytes: usize,
    pub phase_s: f64,
    pub class: TrafficClass,
    pub burst_len: usize,
}

impl CbrFlow {
    /// Inter-train spacing that realizes the average rate.
    fn interval_s(&self) -> f64 {
        (self.burst_len.max(1) * self.packet_bytes) as f64 * 8.0 / self.rate_bps
    }
}

/// Everything the engine needs besides the topology.
#[derive(Debug, Clone)]
pub struct SimInputs {
    /// Per-PMU frame schedules.
    pub plans: Vec<Vec<FramePlan>>,
    /// Shared-traffic sources (management floor and scenario background).
    pub flows: Vec<CbrFlow>,
    /// Concentrator release timeout.
    pub timeout_s: f64,
    /// Frame bytes on the wire: payload plus stack overhead.
    pub frame_wire_bytes: usize,
    /// Overhead added to release packets.
    pub overhead_bytes: usize,
    pub wfq: WfqParams,
    pub epoch_soc: u32,
    pub frame_rate_hz: f64,
    pub duration_s: f64,
}

/// Timing of one hop of a measurement frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HopLog {
    pub link: usize,
    pub enqueued_s: f64,
    /// Transmission start; equals `enqueued_s` plus queueing delay.
    pub tx_start_s: f64,
    pub arrived_s: f64,
}

/// Full per-frame trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PacketLog {
    pub pmu: usize,
    pub seq: u64,
    pub dscp: u8,
    pub anomaly: bool,
    pub measurement_ts: f64,
    pub created_s: f64,
    pub delivered_s: Option<f64>,
    pub dropped: bool,
    pub hops: Vec<HopLog>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReleaseCause {
    Full,
    Timeout,
}

/// One concentrator release.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReleaseLog {
    pub tick: u64,
    pub timestamp_s: f64,
    pub soc: u32,
    pub frac_sec: u32,
    pub release_s: f64,
    pub cause: ReleaseCause,
    pub present: Vec<bool>,
    /// Transit time of the released set to the application server, once
    /// delivered.
    pub forward_delay_s: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub frames_emitted: u64,
    pub frames_delivered: u64,
    pub frames_dropped: u64,
    pub background_emitted: u64,
    pub background_delivered: u64,
    pub background_dropped: u64,
    pub releases_emitted: u64,
    pub releases_delivered: u64,
    pub releases_dropped: u64,
    pub decode_failures: u64,
}

impl Counters {
    /// Every emitted packet is delivered or dropped once the queue drains.
    pub fn conserved(&self) -> bool {
        self.frames_emitted == self.frames_delivered + self.frames_dropped
            && self.background_emitted == self.background_delivered + self.background_dropped
            && self.releases_emitted == self.releases_delivered + self.releases_dropped
    }
}

/// Simulation output: full traces for measurement frames, release log,
/// conservation counters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimOutput {
    pub packets: Vec<PacketLog>,
    pub releases: Vec<ReleaseLog>,
    pub counters: Counters,
    pub pmu_count: usize,
    pub expected_ticks: u64,
    pub timeout_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PacketKind {
    Frame { pmu: usize, seq: u64 },
    Background,
    Release { tick: u64 },
}

#[derive(Debug, Clone)]
struct SimPacket {
    kind: PacketKind,
    class: TrafficClass,
    size_bytes: usize,
    created_s: f64,
    dest: NodeId,
    hops: Vec<HopLog>,
    delivered_s: Option<f64>,
    dropped: bool,
    payload: Option<[u8; FRAME_LEN]>,
}

#[derive(Debug)]
enum EventKind {
    FrameEmit { pmu: usize, seq: u64 },
    BackgroundEmit { flow: usize, seq: u64 },
    TxComplete { port: usize },
    Arrival { handle: usize, node: NodeId },
    PdcDeadline { tick: u64 },
}

struct Event {
    time: f64,
    id: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.time == other.time && self.id == other.id
    }
}
impl Eq for Event {}
impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Event {
    // BinaryHeap is a max-heap; invert for earliest-first, insertion order
    // on simultaneous events
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .time
            .total_cmp(&self.time)
            .then(other.id.cmp(&self.id))
    }
}

struct Port {
    wfq: WfqPort,
    in_service: Option<usize>,
}

struct SlotState {
    arrived: Vec<Option<f64>>,
    released: bool,
    count: usize,
}

struct Engine<'a> {
    topology: &'a Topology,
    inputs: &'a SimInputs,
    events: BinaryHeap<Event>,
    next_event_id: u64,
    packets: Vec<SimPacket>,
    ports: Vec<Port>,
    slots: Vec<SlotState>,
    releases: Vec<ReleaseLog>,
    release_packet_of_tick: Vec<Option<usize>>,
    counters: Counters,
    now: f64,
}

impl<'a> Engine<'a> {
    fn new(topology: &'a Topology, inputs: &'a SimInputs) -> Engine<'a> {
        let pmu_count = topology.pmu_nodes.len();
        let expected_ticks = (inputs.duration_s * inputs.frame_rate_hz).round() as u64;
        let ports = topology
            .links
            .iter()
            .map(|_| Port {
                wfq: WfqPort::new(inputs.wfq),
                in_service: None,
            })
            .collect();
        let slots = (0..expected_ticks)
            .map(|_| SlotState {
                arrived: vec![None; pmu_count],
                released: false,
                count: 0,
            })
            .collect();
        Engine {
            topology,
            inputs,
            events: BinaryHeap::new(),
            next_event_id: 0,
            packets: Vec::new(),
            ports,
            slots,
            releases: Vec::new(),
            release_packet_of_tick: vec![None; expected_ticks as usize],
            counters: Counters::default(),
            now: 0.0,
        }
    }

    fn schedule(&mut self, time: f64, kind: EventKind) {
        let id = self.next_event_id;
        self.next_event_id += 1;
        self.events.push(Event { time, id, kind });
    }

    fn tick_timestamp(&self, tick: u64) -> f64 {
        tick as f64 / self.inputs.frame_rate_hz
    }

    fn tick_soc_frac(&self, tick: u64) -> (u32, u32) {
        let ts = self.tick_timestamp(tick);
        let soc = self.inputs.epoch_soc.wrapping_add(ts.floor() as u32);
        let frac = ((ts.fract() * (1u32 << 24) as f64).round() as u32) & 0x00FF_FFFF;
        (soc, frac)
    }

    fn run(mut self) -> Result<SimOutput, NetsimError> {
        // seed the calendar: every frame, every flow's first packet, every
        // concentrator deadline
        for (pmu, plan) in self.inputs.plans.iter().enumerate() {
            for frame in plan {
                self.schedule(
                    frame.created_s,
                    EventKind::FrameEmit {
                        pmu,
                        seq: frame.seq,
                    },
                );
            }
        }
        for (idx, flow) in self.inputs.flows.iter().enumerate() {
            if flow.rate_bps > 0.0 && flow.phase_s < self.inputs.duration_s {
                self.schedule(flow.phase_s, EventKind::BackgroundEmit { flow: idx, seq: 0 });
            }
        }
        for tick in 0..self.slots.len() as u64 {
            let deadline = self.tick_timestamp(tick) + self.inputs.timeout_s;
            self.schedule(deadline, EventKind::PdcDeadline { tick });
        }

        while let Some(event) = self.events.pop() {
            self.now = event.time;
            match event.kind {
                EventKind::FrameEmit { pmu, seq } => self.emit_frame(pmu, seq),
                EventKind::BackgroundEmit { flow, seq } => self.emit_background(flow, seq),
                EventKind::TxComplete { port } => self.complete_tx(port),
                EventKind::Arrival { handle, node } => self.arrive(handle, node)?,
                EventKind::PdcDeadline { tick } => {
                    if !self.slots[tick as usize].released {
                        self.release_slot(tick, ReleaseCause::Timeout);
                    }
                }
            }
        }
        self.finish()
    }

    fn emit_frame(&mut self, pmu: usize, seq: u64) {
        let plan = self.inputs.plans[pmu][seq as usize];
        let (soc, frac) = self.tick_soc_frac(seq);
        let mut frame = DataFrame::new((pmu + 1) as u16, soc, frac);
        frame.set_anomaly(plan.anomaly);
        frame.phasors[0] = (plan.sample_value as f32, 0.0);
        frame.analog = plan.sample_value as f32;
        let payload = frame_codec::encode(&frame).expect("constructed frame encodes");
        let handle = self.packets.len();
        self.packets.push(SimPacket {
            kind: PacketKind::Frame { pmu, seq },
            class: plan.class,
            size_bytes: self.inputs.frame_wire_bytes,
            created_s: self.now,
            dest: self.topology.pdc,
            hops: Vec::with_capacity(5),
            delivered_s: None,
            dropped: false,
            payload: Some(payload),
        });
        self.counters.frames_emitted += 1;
        let origin = self.topology.pmu_nodes[pmu];
        self.forward(handle, origin);
    }

    fn emit_background(&mut self, flow_idx: usize, seq: u64) {
        let flow = &self.inputs.flows[flow_idx];
        let link = flow.link;
        let size = flow.packet_bytes;
        let class = flow.class;
        let burst = flow.burst_len.max(1);
        let dest = self.topology.link(link).to;
        let next_time = flow.phase_s + (seq + 1) as f64 * flow.interval_s();
        for _ in 0..burst {
            let handle = self.packets.len();
            self.packets.push(SimPacket {
                kind: PacketKind::Background,
                class,
                size_bytes: size,
                created_s: self.now,
                dest,
                hops: Vec::with_capacity(1),
                delivered_s: None,
                dropped: false,
                payload: None,
            });
            self.counters.background_emitted += 1;
            self.enqueue_on_link(handle, link);
        }
        if next_time < self.inputs.duration_s {
            self.schedule(
                next_time,
                EventKind::BackgroundEmit {
                    flow: flow_idx,
                    seq: seq + 1,
                },
            );
        }
    }

    /// Route one hop toward the packet's destination and enqueue there.
    fn forward(&mut self, handle: usize, from: NodeId) {
        let dest = self.packets[handle].dest;
        let link = self
            .topology
            .route(from, dest)
            .expect("validated topology routes all traffic");
        self.enqueue_on_link(handle, link);
    }

    fn enqueue_on_link(&mut self, handle: usize, link: LinkId) {
        let port_idx = link.0;
        self.packets[handle].hops.push(HopLog {
            link: link.0,
            enqueued_s: self.now,
            tx_start_s: f64::NAN,
            arrived_s: f64::NAN,
        });
        let class = self.packets[handle].class;
        let size = self.packets[handle].size_bytes;
        let accepted = self.ports[port_idx].wfq.enqueue(class, size, handle);
        if !accepted {
            self.drop_packet(handle);
            return;
        }
        if self.ports[port_idx].in_service.is_none() {
            self.start_next_tx(port_idx);
        }
    }

    fn start_next_tx(&mut self, port_idx: usize) {
        let Some((_, handle, size)) = self.ports[port_idx].wfq.dequeue() else {
            return;
        };
        self.ports[port_idx].in_service = Some(handle);
        let hop = self.packets[handle]
            .hops
            .last_mut()
            .expect("enqueued packet has a hop record");
        hop.tx_start_s = self.now;
        let ser = self.topology.serialization_s(LinkId(port_idx), size);
        self.schedule(self.now + ser, EventKind::TxComplete { port: port_idx });
    }

    fn complete_tx(&mut self, port_idx: usize) {
        let handle = self.ports[port_idx]
            .in_service
            .take()
            .expect("tx completion for busy port");
        let link = LinkId(port_idx);
        let prop = self.topology.propagation_s(link);
        let to = self.topology.link(link).to;
        self.schedule(self.now + prop, EventKind::Arrival { handle, node: to });
        self.start_next_tx(port_idx);
    }

    fn arrive(&mut self, handle: usize, node: NodeId) -> Result<(), NetsimError> {
        let hop = self.packets[handle]
            .hops
            .last_mut()
            .expect("arriving packet has a hop record");
        hop.arrived_s = self.now;
        if self.packets[handle].dest != node {
            self.forward(handle, node);
            return Ok(());
        }
        self.packets[handle].delivered_s = Some(self.now);
        match self.packets[handle].kind {
            PacketKind::Frame { pmu, seq } => {
                self.counters.frames_delivered += 1;
                let payload = self.packets[handle].payload.expect("frames carry payload");
                if frame_codec::decode(&payload).is_err() {
                    self.counters.decode_failures += 1;
                }
                let slot = &mut self.slots[seq as usize];
                if slot.arrived[pmu].is_some() {
                    return Err(NetsimError::DuplicateArrival {
                        pmu,
                        timestamp_s: self.tick_timestamp(seq),
                    });
                }
                slot.arrived[pmu] = Some(self.now);
                slot.count += 1;
                if !slot.released && slot.count == slot.arrived.len() {
                    self.release_slot(seq, ReleaseCause::Full);
                }
            }
            PacketKind::Background => {
                self.counters.background_delivered += 1;
            }
            PacketKind::Release { tick } => {
                self.counters.releases_delivered += 1;
                let release = self
                    .releases
                    .iter_mut()
                    .find(|r| r.tick == tick)
                    .expect("release logged before delivery");
                release.forward_delay_s = Some(self.now - release.release_s);
            }
        }
        Ok(())
    }

    fn release_slot(&mut self, tick: u64, cause: ReleaseCause) {
        let slot = &mut self.slots[tick as usize];
        slot.released = true;
        let present: Vec<bool> = slot.arrived.iter().map(|a| a.is_some()).collect();
        let count = slot.count;
        let (soc, frac) = self.tick_soc_frac(tick);
        self.releases.push(ReleaseLog {
            tick,
            timestamp_s: self.tick_timestamp(tick),
            soc,
            frac_sec: frac,
            release_s: self.now,
            cause,
            present,
            forward_delay_s: None,
        });
        if count == 0 {
            return; // nothing to forward
        }
        let handle = self.packets.len();
        self.packets.push(SimPacket {
            kind: PacketKind::Release { tick },
            class: TrafficClass::Af23,
            size_bytes: count * FRAME_LEN + self.inputs.overhead_bytes,
            created_s: self.now,
            dest: self.topology.wamc,
            hops: Vec::with_capacity(2),
            delivered_s: None,
            dropped: false,
            payload: None,
        });
        self.counters.releases_emitted += 1;
        self.release_packet_of_tick[tick as usize] = Some(handle);
        self.forward(handle, self.topology.pdc);
    }

    fn drop_packet(&mut self, handle: usize) {
        self.packets[handle].dropped = true;
        match self.packets[handle].kind {
            PacketKind::Frame { .. } => self.counters.frames_dropped += 1,
            PacketKind::Background => self.counters.background_dropped += 1,
            PacketKind::Release { .. } => self.counters.releases_dropped += 1,
        }
    }

    fn finish(self) -> Result<SimOutput, NetsimError> {
        let mut packets: Vec<PacketLog> = self
            .packets
            .iter()
            .filter_map(|p| match p.kind {
                PacketKind::Frame { pmu, seq } => Some(PacketLog {
                    pmu,
                    seq,
                    dscp: p.class.dscp(),
                    anomaly: self.inputs.plans[pmu][seq as usize].anomaly,
                    measurement_ts: self.inputs.plans[pmu][seq as usize].ts,
                    created_s: p.created_s,
                    delivered_s: p.delivered_s,
                    dropped: p.dropped,
                    hops: p.hops.clone(),
                }),
                _ => None,
            })
            .collect();
        packets.sort_by(|a, b| a.pmu.cmp(&b.pmu).then(a.seq.cmp(&b.seq)));
        let mut releases = self.releases;
        releases.sort_by_key(|r| r.tick);
        let counters = self.counters;
        if !counters.conserved() {
            return Err(NetsimError::ConservationViolated(format!("{counters:?}")));
        }
        Ok(SimOutput {
            packets,
            releases,
            counters,
            pmu_count: self.topology.pmu_nodes.len(),
            expected_ticks: self.slots.len() as u64,
            timeout_s: self.inputs.timeout_s,
        })
    }
}

/// Run the event loop over prepared inputs.
pub fn run_planned(topology: &Topology, inputs: &SimInputs) -> Result<SimOutput, NetsimError> {
    if inputs.plans.len() != topology.pmu_nodes.len() {
        return Err(NetsimError::BadScenario(format!(
            "{} frame plans for {} PMUs",
            inputs.plans.len(),
            topology.pmu_nodes.len()
        )));
    }
    let expected = (inputs.duration_s * inputs.frame_rate_hz).round() as usize;
    for (pmu, plan) in inputs.plans.iter().enumerate() {
        if plan.len() != expected {
            return Err(NetsimError::BadScenario(format!(
                "PMU {pmu} plan has {} frames, expected {expected}",
                plan.len()
            )));
        }
    }
    Engine::new(topology, inputs).run()
}

impl SimOutput {
    /// PDC arrivals of delivered frames, for alignment post-processing.
    pub fn arrivals(&self) -> Vec<super::pdc::Arrival> {
        self.packets
            .iter()
            .filter_map(|p| {
                p.delivered_s.map(|at| super::pdc::Arrival {
                    pmu: p.pmu,
                    timestamp_s: p.measurement_ts,
                    arrival_s: at,
                })
            })
            .collect()
    }

    /// Mean transit of released sets to the application server, seconds.
    pub fn mean_forward_delay_s(&self) -> f64 {
        let delays: Vec<f64> = self
            .releases
            .iter()
            .filter_map(|r| r.forward_delay_s)
            .collect();
        if delays.is_empty() {
            0.0
        } else {
            delays.iter().sum::<f64>() / delays.len() as f64
        }
    }

    /// Event log as CSV: one row per measurement frame with per-hop timing.
    pub fn event_log_csv(&self, topology: &Topology) -> String {
        let mut out = String::new();
        out.push_str("pmu,seq,dscp,anomaly,ts,created,delivered,dropped,hops\n");
        for p in &self.packets {
            let delivered = p
                .delivered_s
                .map(|d| d.to_string())
                .unwrap_or_else(|| "-".into());
            let hops: Vec<String> = p
                .hops
                .iter()
                .map(|h| {
                    format!(
                        "{}={}:{}:{}",
                        topology.links[h.link].name, h.enqueued_s, h.tx_start_s, h.arrived_s
                    )
                })
                .collect();
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                p.pmu + 1,
                p.seq,
                p.dscp,
                p.anomaly as u8,
                p.measurement_ts,
                p.created_s,
                delivered,
                p.dropped as u8,
                hops.join("|")
            ));
        }
        out
    }
}
