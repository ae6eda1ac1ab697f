//! Discrete-event simulation of the TDMA body-area network: four patch
//! nodes streaming EMG/ACC over a noisy OOK link with five-pulse majority
//! voting, a central node that demultiplexes by identification header,
//! assembles windows, runs the quantized detector and emits alerts.

mod channel;
mod frame;
mod report;
mod schedule;
mod sim;

pub use channel::{
    ber_majority, crc16_ccitt, solve_pulse_error_for_ber, transmit_bytes, ChannelModel,
};
pub use frame::{pack_codes, unpack_codes, Frame, FrameBlock, MAX_PAYLOAD_BITS};
pub use report::{latency_report, report_csv, verify_collision_free, LatencyReport};
pub use schedule::{
    build_schedule, nanos_to_secs, node_utilization, secs_to_nanos, ChannelSpec, Nanos,
    NodeConfig, TdmaSchedule, DEFAULT_UTILIZATION_BOUND, NANOS_PER_SEC,
};
pub use sim::{
    run_simulation, EventKind, EventLog, LossPolicy, Scenario, SimCounters, SimEvent, SimOutput,
    StreamCapture,
};

use crate::error::Result;
use crate::signal::ModalityKind;

/// The paper-topology default: four leg patches (tibialis anterior and
/// gastrocnemius, both legs), each carrying one EMG channel at 1 kHz and a
/// 3-axis accelerometer at 100 Hz; the central node samples four EEG
/// channels at 500 Hz locally. The model consumes the tibialis pair.
pub fn default_scenario(sim_duration_s: f64, seed: u64) -> Result<Scenario> {
    let mut nodes = Vec::new();
    for (id, site) in ["LT", "RT", "LG", "RG"].iter().enumerate() {
        let mut channels = vec![ChannelSpec {
            modality: ModalityKind::Emg,
            name: format!("EMG_{site}"),
            sample_rate_hz: 1000.0,
        }];
        for axis in ["X", "Y", "Z"] {
            channels.push(ChannelSpec {
                modality: ModalityKind::Acc,
                name: format!("ACC_{site}_{axis}"),
                sample_rate_hz: 100.0,
            });
        }
        nodes.push(NodeConfig::new(id as u8, channels));
    }
    let schedule = build_schedule(&nodes, 1e-3, 40_000_000, 20e-6, 20.0)?;

    let local_channels = (1..=4)
        .map(|i| ChannelSpec {
            modality: ModalityKind::Eeg,
            name: format!("EEG_{i}"),
            sample_rate_hz: 500.0,
        })
        .collect();

    Ok(Scenario {
        nodes,
        schedule,
        channel: ChannelModel::clean(),
        local_channels,
        selection: crate::signal::default_channel_complement(),
        window_length_s: 3.0,
        inference_time_s: 2.3,
        sim_duration_s,
        seed,
        loss_policy: LossPolicy::ZeroFill,
        alert_threshold: 0.5,
        saturation_backlog: 3,
        record_frame_events: true,
        record_streams: false,
        fog_modulation: true,
    })
}
