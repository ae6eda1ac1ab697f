//! Aggregate statistics over an event log.

use std::fmt::Write as _;

use super::sim::{EventKind, EventLog};

const TX_PJ_PER_BIT: f64 = 3.4;
const RX_PJ_PER_BIT: f64 = 110.7;

/// Summary of one simulation run. A pure function of the log: the same log
/// always reduces to the same report.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct LatencyReport {
    pub windows_ready: u64,
    pub windows_degraded: u64,
    pub inferences: u64,
    pub alerts: u64,
    pub mean_alert_latency_s: f64,
    pub max_alert_latency_s: f64,
    pub frames_tx: u64,
    pub frames_lost: u64,
    pub backlog_high_water: usize,
    pub saturated: bool,
    pub sync_margin_s: f64,
    /// Radio energy bookkeeping at the measured per-bit figures.
    pub tx_energy_j: f64,
    pub rx_energy_j: f64,
}

pub fn latency_report(log: &EventLog) -> LatencyReport {
    let mut latencies_ns: Vec<u64> = Vec::new();
    for e in &log.events {
        if let EventKind::Alert { latency_ns, .. } = e.kind {
            latencies_ns.push(latency_ns);
        }
    }
    let c = &log.counters;
    let mean_alert_latency_s = if latencies_ns.is_empty() {
        0.0
    } else {
        latencies_ns.iter().sum::<u64>() as f64 / latencies_ns.len() as f64 / 1e9
    };
    let max_alert_latency_s =
        latencies_ns.iter().max().copied().unwrap_or(0) as f64 / 1e9;
    LatencyReport {
        windows_ready: c.windows_ready,
        windows_degraded: c.windows_degraded,
        inferences: c.inferences,
        alerts: c.alerts,
        mean_alert_latency_s,
        max_alert_latency_s,
        frames_tx: c.frames_tx,
        frames_lost: c.frames_crc_fail,
        backlog_high_water: c.backlog_high_water,
        saturated: log.saturated,
        sync_margin_s: log.sync_margin_s,
        tx_energy_j: c.bits_tx as f64 * TX_PJ_PER_BIT * 1e-12,
        rx_energy_j: c.bits_rx as f64 * RX_PJ_PER_BIT * 1e-12,
    }
}

/// Summary CSV with one `name,value` row per statistic.
pub fn report_csv(report: &LatencyReport) -> String {
    let mut out = String::from("stat,value\n");
    let mut row = |k: &str, v: String| {
        let _ = writeln!(out, "{k},{v}");
    };
    row("windows_ready", report.windows_ready.to_string());
    row("windows_degraded", report.windows_degraded.to_string());
    row("inferences", report.inferences.to_string());
    row("alerts", report.alerts.to_string());
    row(
        "mean_alert_latency_s",
        format!("{:.6}", report.mean_alert_latency_s),
    );
    row(
        "max_alert_latency_s",
        format!("{:.6}", report.max_alert_latency_s),
    );
    row("frames_tx", report.frames_tx.to_string());
    row("frames_lost", report.frames_lost.to_string());
    row(
        "backlog_high_water",
        report.backlog_high_water.to_string(),
    );
    row("saturated", report.saturated.to_string());
    row("sync_margin_s", format!("{:.3}", report.sync_margin_s));
    row("tx_energy_j", format!("{:.9}", report.tx_energy_j));
    row("rx_energy_j", format!("{:.9}", report.rx_energy_j));
    out
}

/// Scan the log for overlapping transmissions from different nodes.
/// Returns the number of frame transmissions inspected.
pub fn verify_collision_free(log: &EventLog) -> crate::error::Result<u64> {
    let mut tx: Vec<(u64, u64, u8)> = Vec::new(); // (start, end, node)
    for e in &log.events {
        if let EventKind::FrameTx { bits, .. } = e.kind {
            let airtime = (f64::from(bits) / log.link_rate_bps as f64 * 1e9).round() as u64;
            tx.push((e.time_ns, e.time_ns + airtime, e.node_id));
        }
    }
    tx.sort_unstable();
    for pair in tx.windows(2) {
        let (_, end_a, node_a) = pair[0];
        let (start_b, _, node_b) = pair[1];
        if start_b < end_a && node_a != node_b {
            return Err(crate::error::Error::Watchdog(format!(
                "collision: node {node_a} still on air at {start_b} ns when node {node_b} starts"
            )));
        }
    }
    Ok(tx.len() as u64)
}
