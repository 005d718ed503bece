//! Edge anomaly detection for synchrophasor voltage streams, plus a
//! deterministic discrete-event simulator of a wide-area PMU network with
//! DiffServ/WFQ quality of service.
//!
//! The crate is organized around the pipeline it implements:
//!
//! * [`signalgen`] — synthetic PMU voltage records with labeled fault
//!   intervals (sag, trip, and multi-phase fault envelopes at configurable
//!   noise levels).
//! * [`ssa`] — singular-spectrum-analysis change-point detection: Hankel
//!   embedding, SVD, diagonal averaging, and a subspace-distance statistic.
//! * [`knn`] — per-cycle window features (time and frequency domain) and a
//!   k-nearest-neighbor normal/fault classifier.
//! * [`frame_codec`] — bit-exact encode/decode of the 112-byte C37.118.2-style
//!   measurement data frame.
//! * [`netsim`] — event-driven simulation of seven PMU substations feeding a
//!   phasor data concentrator over a QoS-enabled WAN, with fog-side marking
//!   of anomalous traffic.
//! * [`metrics`] — end-to-end delay statistics and completeness-vs-timeout
//!   curves computed from simulation logs.

pub mod eval;
pub mod frame_codec;
pub mod knn;
pub mod metrics;
pub mod netsim;
pub mod rng;
pub mod signalgen;
pub mod ssa;
