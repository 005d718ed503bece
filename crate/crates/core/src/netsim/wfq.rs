//! Weighted fair queueing output port, self-clocked fair queueing flavor.
//!
//! Each arriving packet receives a virtual finish tag
//! `max(V, last_tag(class)) + size / weight(class)` where `V` is the tag of
//! the packet currently in service; the scheduler always serves the head
//! packet with the smallest tag. Backlogged classes therefore share the link
//! in proportion to their weights, while an idle class costs nothing.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

/// DiffServ-style traffic classes carried by the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TrafficClass {
    /// Expedited forwarding: fog-marked anomalous measurement data.
    Ef,
    /// Assured forwarding 23: ordinary measurement data.
    Af23,
    /// Shared/background traffic.
    Background,
}

pub const CLASS_COUNT: usize = 3;

impl TrafficClass {
    pub fn index(self) -> usize {
        match self {
            TrafficClass::Ef => 0,
            TrafficClass::Af23 => 1,
            TrafficClass::Background => 2,
        }
    }

    /// DiffServ codepoint carried in packet logs.
    pub fn dscp(self) -> u8 {
        match self {
            TrafficClass::Ef => 46,
            TrafficClass::Af23 => 22,
            TrafficClass::Background => 0,
        }
    }
}

/// Scheduler weights and per-class buffer limit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WfqParams {
    pub weight_ef: f64,
    pub weight_af23: f64,
    pub weight_background: f64,
    pub buffer_bytes: usize,
}

impl Default for WfqParams {
    fn default() -> Self {
        WfqParams {
            weight_ef: 4.0,
            weight_af23: 1.0,
            weight_background: 1.0,
            buffer_bytes: 64 * 1024,
        }
    }
}

impl WfqParams {
    fn weight(&self, class: TrafficClass) -> f64 {
        match class {
            TrafficClass::Ef => self.weight_ef,
            TrafficClass::Af23 => self.weight_af23,
            TrafficClass::Background => self.weight_background,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Queued {
    handle: usize,
    size_bytes: usize,
    finish_tag: f64,
}

/// One output port's queueing state.
#[derive(Debug, Clone)]
pub struct WfqPort {
    params: WfqParams,
    queues: [VecDeque<Queued>; CLASS_COUNT],
    queued_bytes: [usize; CLASS_COUNT],
    last_tag: [f64; CLASS_COUNT],
    virtual_time: f64,
    pub served_bytes: [u64; CLASS_COUNT],
    pub dropped_packets: [u64; CLASS_COUNT],
}

impl WfqPort {
    pub fn new(params: WfqParams) -> Self {
        WfqPort {
            params,
            queues: Default::default(),
            queued_bytes: [0; CLASS_COUNT],
            last_tag: [0.0; CLASS_COUNT],
            virtual_time: 0.0,
            served_bytes: [0; CLASS_COUNT],
            dropped_packets: [0; CLASS_COUNT],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.queues.iter().all(|q| q.is_empty())
    }

    /// Tail-drop enqueue. Returns false when the class buffer is full.
    pub fn enqueue(&mut self, class: TrafficClass, size_bytes: usize, handle: usize) -> bool {
        let c = class.index();
        if self.queued_bytes[c] + size_bytes > self.params.buffer_bytes {
            self.dropped_packets[c] += 1;
            return false;
        }
        let start = self.virtual_time.max(self.last_tag[c]);
        let tag = start + size_bytes as f64 / self.params.weight(class);
        self.last_tag[c] = tag;
        self.queued_bytes[c] += size_bytes;
        self.queues[c].push_back(Queued {
            handle,
            size_bytes,
            finish_tag: tag,
        });
        true
    }

    /// Pop the head packet with the smallest finish tag (FIFO within a
    /// class, deterministic class order on exact ties).
    pub fn dequeue(&mut self) -> Option<(TrafficClass, usize, usize)> {
        let mut best: Option<(usize, f64)> = None;
        for (c, queue) in self.queues.iter().enumerate() {
            if let Some(front) = queue.front() {
                match best {
                    Some((_, tag)) if tag <= front.finish_tag => {}
                    _ => best = Some((c, front.finish_tag)),
                }
            }
        }
        let (c, _) = best?;
        let item = self.queues[c].pop_front().expect("nonempty queue");
        self.queued_bytes[c] -= item.size_bytes;
        self.virtual_time = item.finish_tag;
        self.served_bytes[c] += item.size_bytes as u64;
        let class = match c {
            0 => TrafficClass::Ef,
            1 => TrafficClass::Af23,
            _ => TrafficClass::Background,
        };
        Some((class, item.handle, item.size_bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_class_is_fifo() {
        let mut port = WfqPort::new(WfqParams::default());
        for handle in 0..10 {
            assert!(port.enqueue(TrafficClass::Af23, 100, handle));
        }
        for expect in 0..10 {
            let (class, handle, _) = port.dequeue().unwrap();
            assert_eq!(class, TrafficClass::Af23);
            assert_eq!(handle, expect);
        }
        assert!(port.dequeue().is_none());
    }

    #[test]
    fn no_reordering_within_class_under_contention() {
        let mut port = WfqPort::new(WfqParams::default());
        let mut handle = 0;
        for _ in 0..20 {
            port.enqueue(TrafficClass::Ef, 166, handle);
            port.enqueue(TrafficClass::Af23, 166, handle + 1);
            port.enqueue(TrafficClass::Background, 1500, handle + 2);
            handle += 3;
        }
        let mut last_per_class: [Option<usize>; CLASS_COUNT] = [None; CLASS_COUNT];
        while let Some((class, h, _)) = port.dequeue() {
            let c = class.index();
            if let Some(prev) = last_per_class[c] {
                assert!(h > prev, "{class:?} reordered: {h} after {prev}");
            }
            last_per_class[c] = Some(h);
        }
    }

    #[test]
    fn backlogged_shares_follow_weights() {
        // keep all classes saturated; served byte shares approach 4:1:1
        let params = WfqParams::default();
        let mut port = WfqPort::new(WfqParams {
            buffer_bytes: usize::MAX,
            ..params
        });
        let size = 500usize;
        let total_packets = 30_000usize;
        for h in 0..total_packets {
            port.enqueue(TrafficClass::Ef, size, h);
            port.enqueue(TrafficClass::Af23, size, h);
            port.enqueue(TrafficClass::Background, size, h);
        }
        let mut served = [0u64; CLASS_COUNT];
        for _ in 0..total_packets {
            let (class, _, bytes) = port.dequeue().unwrap();
            served[class.index()] += bytes as u64;
        }
        let total: u64 = served.iter().sum();
        let share = |c: usize| served[c] as f64 / total as f64;
        assert!((share(0) - 4.0 / 6.0).abs() < 0.05 * (4.0 / 6.0), "EF share {}", share(0));
        assert!((share(1) - 1.0 / 6.0).abs() < 0.05, "AF share {}", share(1));
        assert!((share(2) - 1.0 / 6.0).abs() < 0.05, "BG share {}", share(2));
    }

    #[test]
    fn ef_overtakes_queued_lower_classes() {
        let mut port = WfqPort::new(WfqParams::default());
        port.enqueue(TrafficClass::Background, 1500, 0);
        port.enqueue(TrafficClass::Background, 1500, 1);
        // background head goes first (it was alone), then EF jumps the queue
        let (c0, h0, _) = port.dequeue().unwrap();
        assert_eq!((c0, h0), (TrafficClass::Background, 0));
        port.enqueue(TrafficClass::Ef, 166, 2);
        let (c1, h1, _) = port.dequeue().unwrap();
        assert_eq!((c1, h1), (TrafficClass::Ef, 2));
        let (c2, h2, _) = port.dequeue().unwrap();
        assert_eq!((c2, h2), (TrafficClass::Background, 1));
    }

    #[test]
    fn tail_drop_on_full_buffer() {
        let mut port = WfqPort::new(WfqParams {
            buffer_bytes: 1000,
            ..WfqParams::default()
        });
        assert!(port.enqueue(TrafficClass::Af23, 600, 0));
        assert!(!port.enqueue(TrafficClass::Af23, 600, 1));
        assert_eq!(port.dropped_packets[TrafficClass::Af23.index()], 1);
        // other classes have their own buffers
        assert!(port.enqueue(TrafficClass::Ef, 600, 2));
    }
}
