//! Node configuration and the round-robin TDMA schedule.

use crate::error::{Error, Result};
use crate::signal::ModalityKind;

pub type Nanos = u64;

pub const NANOS_PER_SEC: f64 = 1e9;

pub fn secs_to_nanos(s: f64) -> Nanos {
    (s * NANOS_PER_SEC).round() as Nanos
}

pub fn nanos_to_secs(ns: Nanos) -> f64 {
    ns as f64 / NANOS_PER_SEC
}

/// One radio channel carried by a patch node.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChannelSpec {
    pub modality: ModalityKind,
    pub name: String,
    pub sample_rate_hz: f64,
}

/// A patch sensor node: its channels and framing field widths.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct NodeConfig {
    pub node_id: u8,
    pub channels: Vec<ChannelSpec>,
    pub sample_bits: u32,
    /// Identification header width.
    pub id_bits: u32,
    pub seq_bits: u32,
    pub crc_bits: u32,
}

impl NodeConfig {
    pub fn new(node_id: u8, channels: Vec<ChannelSpec>) -> Self {
        NodeConfig {
            node_id,
            channels,
            sample_bits: 12,
            id_bits: 8,
            seq_bits: 16,
            crc_bits: 16,
        }
    }

    /// Raw sample payload rate in bits per second.
    pub fn payload_rate_bps(&self) -> f64 {
        self.channels
            .iter()
            .map(|c| c.sample_rate_hz * f64::from(self.sample_bits))
            .sum()
    }

    pub fn header_bits(&self) -> u32 {
        self.id_bits + self.seq_bits
    }
}

/// Round-robin TDMA schedule over the patch nodes.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TdmaSchedule {
    pub slot_duration: Nanos,
    pub guard_time: Nanos,
    /// Slot owners, one slot per entry.
    pub superframe: Vec<u8>,
    pub link_rate_bps: u64,
    /// Clock drift assumed for the resynchronization-margin diagnostic.
    pub drift_ppm: f64,
}

impl TdmaSchedule {
    pub fn superframe_period(&self) -> Nanos {
        self.slot_duration * self.superframe.len() as Nanos
    }

    /// Usable payload bits per slot after the guard interval.
    pub fn slot_capacity_bits(&self) -> u64 {
        let usable = self.slot_duration.saturating_sub(self.guard_time);
        (nanos_to_secs(usable) * self.link_rate_bps as f64) as u64
    }

    /// Airtime of one frame at the link rate.
    pub fn airtime(&self, bits: u64) -> Nanos {
        secs_to_nanos(bits as f64 / self.link_rate_bps as f64)
    }

    /// Seconds until accumulated two-sided clock drift eats the guard time;
    /// after this horizon nodes would need resynchronization. Infinite when
    /// drift is zero. This is a reported budget: the simulator keeps nodes
    /// on their initially synchronized grid.
    pub fn sync_margin_s(&self) -> f64 {
        if self.drift_ppm <= 0.0 {
            return f64::INFINITY;
        }
        nanos_to_secs(self.guard_time) / (2.0 * self.drift_ppm * 1e-6)
    }
}

/// Default utilization bound: consume at most this fraction of a node's
/// slot capacity after headers and guard time.
pub const DEFAULT_UTILIZATION_BOUND: f64 = 0.8;

/// Build and validate a round-robin schedule.
pub fn build_schedule(
    nodes: &[NodeConfig],
    slot_duration_s: f64,
    link_rate_bps: u64,
    guard_time_s: f64,
    drift_ppm: f64,
) -> Result<TdmaSchedule> {
    if nodes.is_empty() {
        return Err(Error::InvalidConfig("schedule needs at least one node".into()));
    }
    let mut seen = std::collections::BTreeSet::new();
    for n in nodes {
        if !seen.insert(n.node_id) {
            return Err(Error::InfeasibleSchedule(format!(
                "duplicate node id {}",
                n.node_id
            )));
        }
    }
    if !(slot_duration_s > 0.0) || !(guard_time_s >= 0.0) || guard_time_s >= slot_duration_s {
        return Err(Error::InvalidConfig(format!(
            "invalid slot timing: slot {slot_duration_s} s, guard {guard_time_s} s"
        )));
    }
    let schedule = TdmaSchedule {
        slot_duration: secs_to_nanos(slot_duration_s),
        guard_time: secs_to_nanos(guard_time_s),
        superframe: nodes.iter().map(|n| n.node_id).collect(),
        link_rate_bps: link_rate_bps,
        drift_ppm,
    };
    // Per-node throughput check: effective rate including per-superframe
    // framing overhead against the utilization bound.
    for node in nodes {
        let util = node_utilization(node, &schedule);
        if util > DEFAULT_UTILIZATION_BOUND {
            return Err(Error::InfeasibleSchedule(format!(
                "node {} needs {:.1}% of its slot capacity (bound {:.0}%)",
                node.node_id,
                util * 100.0,
                DEFAULT_UTILIZATION_BOUND * 100.0
            )));
        }
    }
    Ok(schedule)
}

/// Fraction of a node's per-superframe slot capacity its traffic consumes,
/// headers included.
pub fn node_utilization(node: &NodeConfig, schedule: &TdmaSchedule) -> f64 {
    let period_s = nanos_to_secs(schedule.superframe_period());
    let payload_bits = node.payload_rate_bps() * period_s;
    // One frame per superframe: id + seq header plus per-channel sub-block
    // headers (channel index byte + count byte), plus the CRC.
    let overhead_bits = f64::from(node.header_bits())
        + 16.0 * node.channels.len() as f64
        + f64::from(node.crc_bits);
    let capacity = schedule.slot_capacity_bits() as f64;
    (payload_bits + overhead_bits) / capacity
}
