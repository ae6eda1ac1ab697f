//! Discrete-event simulation of the body-area network: patch nodes stream
//! EMG/ACC codes over the TDMA link, the central node samples EEG locally,
//! demultiplexes frames by identification header, assembles 3 s windows,
//! runs the quantized detector under a latency budget, and emits alerts.
//!
//! One logical event loop over a priority queue keyed by timestamp; ties
//! break by event class, then node id, then insertion order. All
//! randomness derives from the scenario seed, so identical inputs replay
//! identical logs.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::compress::{quantized_forward, QuantizedModel};
use crate::error::{Error, Result};
use crate::frontend::{adc_dequantize_sample, adc_quantize_sample};
use crate::seed;
use crate::signal::{ModalityBlock, ModalityKind, Window};

use super::channel::{transmit_bytes, ChannelModel};
use super::frame::{Frame, FrameBlock, MAX_PAYLOAD_BITS};
use super::schedule::{
    nanos_to_secs, secs_to_nanos, ChannelSpec, Nanos, NodeConfig, TdmaSchedule,
};

/// What the receiver writes into a gap left by a CRC-failed frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossPolicy {
    ZeroFill,
    HoldLast,
}

/// Full simulation scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub nodes: Vec<NodeConfig>,
    pub schedule: TdmaSchedule,
    pub channel: ChannelModel,
    /// Channels the central node samples locally (EEG).
    pub local_channels: Vec<ChannelSpec>,
    /// Model input channels in window order, grouped per modality.
    pub selection: Vec<(ModalityKind, String)>,
    pub window_length_s: f64,
    pub inference_time_s: f64,
    pub sim_duration_s: f64,
    pub seed: u64,
    pub loss_policy: LossPolicy,
    pub alert_threshold: f64,
    /// In-system window count (queued + running) that flags saturation.
    pub saturation_backlog: usize,
    pub record_frame_events: bool,
    pub record_streams: bool,
    /// Plant FoG episodes in the signal sources.
    pub fog_modulation: bool,
}

/// Acquisition gain per modality: converter millivolts per input unit,
/// scaled by 1000 as in the front-end model (EEG x200, EMG x50 on
/// microvolts; ACC maps 10 g onto the 600 mV rail).
fn gain_for(modality: ModalityKind) -> f64 {
    match modality {
        ModalityKind::Eeg => 200.0,
        ModalityKind::Emg => 50.0,
        ModalityKind::Acc => 60_000.0,
    }
}

const ADC_BITS: u32 = 12;
const ADC_RANGE_MV: f64 = 600.0;

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub enum EventKind {
    SlotStart,
    FrameTx { seq: u16, bits: u32 },
    FrameRx { seq: u16, bits: u32 },
    FrameCrcFail { seq: u16, bits: u32 },
    WindowReady { window: u32, degraded: bool },
    InferenceStart { window: u32 },
    InferenceDone { window: u32, probability: f64 },
    Alert { window: u32, latency_ns: u64 },
}

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SimEvent {
    pub time_ns: Nanos,
    pub node_id: u8,
    pub kind: EventKind,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, serde::Serialize)]
pub struct SimCounters {
    pub slots: u64,
    pub frames_tx: u64,
    pub frames_rx: u64,
    pub frames_crc_fail: u64,
    pub bits_tx: u64,
    pub bits_rx: u64,
    pub windows_ready: u64,
    pub windows_degraded: u64,
    pub inferences: u64,
    pub alerts: u64,
    pub backlog_high_water: usize,
}

/// Time-ordered record of one simulation run.
#[derive(Debug, Clone)]
pub struct EventLog {
    pub events: Vec<SimEvent>,
    pub counters: SimCounters,
    /// Resynchronization budget implied by guard time and drift.
    pub sync_margin_s: f64,
    pub saturated: bool,
    pub link_rate_bps: u64,
    pub window_length_s: f64,
}

impl EventLog {
    /// Line-delimited export: `time_ns<TAB>kind<TAB>node<TAB>details`.
    pub fn to_lines(&self) -> String {
        use std::fmt::Write as _;
        let mut out = String::new();
        for e in &self.events {
            let (kind, detail) = match &e.kind {
                EventKind::SlotStart => ("slot_start", String::new()),
                EventKind::FrameTx { seq, bits } => ("frame_tx", format!("seq={seq} bits={bits}")),
                EventKind::FrameRx { seq, bits } => ("frame_rx", format!("seq={seq} bits={bits}")),
                EventKind::FrameCrcFail { seq, bits } => {
                    ("frame_crc_fail", format!("seq={seq} bits={bits}"))
                }
                EventKind::WindowReady { window, degraded } => {
                    ("window_ready", format!("window={window} degraded={degraded}"))
                }
                EventKind::InferenceStart { window } => {
                    ("inference_start", format!("window={window}"))
                }
                EventKind::InferenceDone { window, probability } => (
                    "inference_done",
                    format!("window={window} probability={probability:.6}"),
                ),
                EventKind::Alert { window, latency_ns } => {
                    ("alert", format!("window={window} latency_ns={latency_ns}"))
                }
            };
            let _ = writeln!(out, "{}\t{}\t{}\t{}", e.time_ns, kind, e.node_id, detail);
        }
        out
    }
}

/// Reconstructed and source code streams, for demultiplexing checks.
#[derive(Debug, Clone, Default)]
pub struct StreamCapture {
    pub source: BTreeMap<String, Vec<u16>>,
    pub central: BTreeMap<String, Vec<u16>>,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub log: EventLog,
    pub streams: Option<StreamCapture>,
}

// ---------------------------------------------------------------------------
// Signal sources

/// Deterministic per-channel sample source: Gaussian noise with optional
/// FoG-episode modulation, digitized through the acquisition gain and the
/// 12-bit converter.
struct SampleGen {
    period_ns: Nanos,
    next_idx: u64,
    rng: ChaCha8Rng,
    noise: Normal<f64>,
    fog_rms_gain: f64,
    tremor: Option<(f64, f64, f64)>, // (hz, amplitude, phase)
    episodes: Vec<(f64, f64)>,
    gain: f64,
}

impl SampleGen {
    fn new(
        spec: &ChannelSpec,
        seed_value: u64,
        episodes: Vec<(f64, f64)>,
        fog_modulation: bool,
    ) -> Result<SampleGen> {
        let period = 1e9 / spec.sample_rate_hz;
        if (period - period.round()).abs() > 1e-6 {
            return Err(Error::InvalidConfig(format!(
                "sample rate {} Hz does not divide 1 GHz ticks",
                spec.sample_rate_hz
            )));
        }
        let (base_rms, fog_rms_gain, tremor) = match spec.modality {
            ModalityKind::Eeg => (20.0, 1.3, None),
            ModalityKind::Emg => (30.0, 2.0, None),
            ModalityKind::Acc => (0.05, 1.0, Some((5.0, 0.1, 0.0))),
        };
        let tremor = if fog_modulation { tremor } else { None };
        let fog_rms_gain = if fog_modulation { fog_rms_gain } else { 1.0 };
        Ok(SampleGen {
            period_ns: period.round() as Nanos,
            next_idx: 0,
            rng: seed::rng(seed_value),
            noise: Normal::new(0.0, base_rms).expect("positive rms"),
            fog_rms_gain,
            tremor,
            episodes: if fog_modulation { episodes } else { Vec::new() },
            gain: gain_for(spec.modality),
        })
    }

    fn in_fog(&self, t_s: f64) -> bool {
        self.episodes.iter().any(|&(a, b)| t_s >= a && t_s < b)
    }

    /// Generate codes for every sample with timestamp <= `t_ns`.
    fn codes_until(&mut self, t_ns: Nanos, out: &mut Vec<u16>) {
        let available = t_ns / self.period_ns + 1;
        while self.next_idx < available {
            let t_s = nanos_to_secs(self.next_idx * self.period_ns);
            let fog = self.in_fog(t_s);
            let mut v = self.noise.sample(&mut self.rng);
            if fog {
                v *= self.fog_rms_gain;
                if let Some((hz, amp, phase)) = self.tremor {
                    v += amp * (std::f64::consts::TAU * hz * t_s + phase).sin();
                }
            }
            let mv = (v * self.gain / 1000.0).clamp(-ADC_RANGE_MV, ADC_RANGE_MV);
            out.push(adc_quantize_sample(mv, ADC_BITS, ADC_RANGE_MV));
            self.next_idx += 1;
        }
    }
}

fn plant_sim_episodes(duration_s: f64, seed_value: u64) -> Vec<(f64, f64)> {
    let mut rng = seed::rng(seed_value);
    let mut intervals = Vec::new();
    let mut t = rand::Rng::random_range(&mut rng, 2.0..6.0);
    while t < duration_s {
        let len = rand::Rng::random_range(&mut rng, 3.0..8.0);
        let end = (t + len).min(duration_s);
        if end > t {
            intervals.push((t, end));
        }
        t = end + rand::Rng::random_range(&mut rng, 6.0..12.0);
    }
    intervals
}

// ---------------------------------------------------------------------------
// Node and central state

struct NodeState {
    cfg: NodeConfig,
    gens: Vec<SampleGen>,
    pending: Vec<VecDeque<u16>>,
    seq: u16,
}

struct RxChannel {
    name: String,
    modality: ModalityKind,
    period_ns: Nanos,
    gain: f64,
    codes: Vec<u16>,
    degraded: Vec<(usize, usize)>,
}

impl RxChannel {
    fn degraded_in(&self, lo: usize, hi: usize) -> bool {
        self.degraded.iter().any(|&(a, b)| a < hi && b > lo)
    }
}

struct CentralState {
    /// Radio channels, indexed by (node index, channel index).
    rx: BTreeMap<(u8, u8), RxChannel>,
    local_gens: Vec<SampleGen>,
    local: Vec<RxChannel>,
    next_window: u32,
    window_len: Nanos,
    busy: bool,
    queue: VecDeque<(u32, Window, Nanos)>,
}

impl CentralState {
    fn needed_codes(ch_period: Nanos, window: u32, window_len: Nanos) -> usize {
        // Samples with timestamp < (window+1)*window_len.
        let end = Nanos::from(window + 1) * window_len;
        (end.div_ceil(ch_period)) as usize
    }

    fn all_radio_ready(&self, window: u32) -> bool {
        self.rx.values().all(|c| {
            c.codes.len() >= Self::needed_codes(c.period_ns, window, self.window_len)
        })
    }
}

// ---------------------------------------------------------------------------
// Event queue

#[derive(Debug)]
enum Action {
    SlotStart { slot_index: u64 },
    Delivery { frame_bytes: Vec<u8>, frame: Frame, bits: u32 },
    InferenceDone { window: u32 },
}

struct Queued {
    time: Nanos,
    class: u8,
    node_id: u8,
    insert_order: u64,
    action: Action,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp_key() == other.cmp_key()
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.cmp_key().cmp(&other.cmp_key())
    }
}
impl Queued {
    fn cmp_key(&self) -> (Nanos, u8, u8, u64) {
        (self.time, self.class, self.node_id, self.insert_order)
    }
}

const CLASS_SLOT: u8 = 0;
const CLASS_DELIVERY: u8 = 1;
const CLASS_INFERENCE: u8 = 2;

const WATCHDOG_MAX_EVENTS: u64 = 500_000_000;

// ---------------------------------------------------------------------------

/// Run the scenario against a quantized model.
pub fn run_simulation(scenario: &Scenario, model: &QuantizedModel) -> Result<SimOutput> {
    if scenario.schedule.superframe.is_empty() {
        return Err(Error::InfeasibleSchedule("empty superframe".into()));
    }
    if !(scenario.inference_time_s > 0.0) || !(scenario.sim_duration_s > 0.0) {
        return Err(Error::InvalidConfig(
            "inference time and duration must be positive".into(),
        ));
    }
    let window_len = secs_to_nanos(scenario.window_length_s);
    let sim_end = secs_to_nanos(scenario.sim_duration_s);
    let inference_ns = secs_to_nanos(scenario.inference_time_s);
    let ber = scenario.channel.bit_error_rate();

    let episodes = if scenario.fog_modulation {
        plant_sim_episodes(scenario.sim_duration_s, seed::derive_labeled(scenario.seed, "episodes"))
    } else {
        Vec::new()
    };

    // Node state.
    let mut nodes: BTreeMap<u8, NodeState> = BTreeMap::new();
    for cfg in &scenario.nodes {
        let mut gens = Vec::with_capacity(cfg.channels.len());
        for ch in &cfg.channels {
            gens.push(SampleGen::new(
                ch,
                seed::derive_labeled(scenario.seed, &format!("node/{}/{}", cfg.node_id, ch.name)),
                episodes.clone(),
                scenario.fog_modulation,
            )?);
        }
        nodes.insert(
            cfg.node_id,
            NodeState {
                pending: cfg.channels.iter().map(|_| VecDeque::new()).collect(),
                gens,
                seq: 0,
                cfg: cfg.clone(),
            },
        );
    }

    // Central state: radio channel map plus local EEG.
    let mut central = CentralState {
        rx: BTreeMap::new(),
        local_gens: Vec::new(),
        local: Vec::new(),
        next_window: 0,
        window_len,
        busy: false,
        queue: VecDeque::new(),
    };
    for cfg in &scenario.nodes {
        for (ci, ch) in cfg.channels.iter().enumerate() {
            central.rx.insert(
                (cfg.node_id, ci as u8),
                RxChannel {
                    name: ch.name.clone(),
                    modality: ch.modality,
                    period_ns: (1e9 / ch.sample_rate_hz).round() as Nanos,
                    gain: gain_for(ch.modality),
                    codes: Vec::new(),
                    degraded: Vec::new(),
                },
            );
        }
    }
    for ch in &scenario.local_channels {
        central.local_gens.push(SampleGen::new(
            ch,
            seed::derive_labeled(scenario.seed, &format!("central/{}", ch.name)),
            episodes.clone(),
            scenario.fog_modulation,
        )?);
        central.local.push(RxChannel {
            name: ch.name.clone(),
            modality: ch.modality,
            period_ns: (1e9 / ch.sample_rate_hz).round() as Nanos,
            gain: gain_for(ch.modality),
            codes: Vec::new(),
            degraded: Vec::new(),
        });
    }

    let mut channel_rng = seed::rng(seed::derive_labeled(scenario.seed, "channel"));
    let mut queue: BinaryHeap<Reverse<Queued>> = BinaryHeap::new();
    let mut insert_order = 0u64;
    let push = |queue: &mut BinaryHeap<Reverse<Queued>>,
                    insert_order: &mut u64,
                    time: Nanos,
                    class: u8,
                    node_id: u8,
                    action: Action| {
        *insert_order += 1;
        queue.push(Reverse(Queued {
            time,
            class,
            node_id,
            insert_order: *insert_order,
            action,
        }));
    };

    push(&mut queue, &mut insert_order, 0, CLASS_SLOT, scenario.schedule.superframe[0], Action::SlotStart { slot_index: 0 });

    let mut events: Vec<SimEvent> = Vec::new();
    let mut counters = SimCounters::default();
    let mut streams = scenario.record_streams.then(StreamCapture::default);
    let mut processed = 0u64;

    while let Some(Reverse(item)) = queue.pop() {
        processed += 1;
        if processed > WATCHDOG_MAX_EVENTS {
            return Err(Error::Watchdog(format!(
                "event budget exhausted at t = {} s",
                nanos_to_secs(item.time)
            )));
        }
        let now = item.time;
        match item.action {
            Action::SlotStart { slot_index } => {
                let slot_in_frame = (slot_index as usize) % scenario.schedule.superframe.len();
                let node_id = scenario.schedule.superframe[slot_in_frame];
                counters.slots += 1;
                if scenario.record_frame_events {
                    events.push(SimEvent {
                        time_ns: now,
                        node_id,
                        kind: EventKind::SlotStart,
                    });
                }

                // Schedule slots one superframe past the horizon so every
                // sample taken inside it still gets delivered.
                let next_start = (slot_index + 1) * scenario.schedule.slot_duration;
                if next_start < sim_end + scenario.schedule.superframe_period() {
                    let next_node = scenario.schedule.superframe
                        [((slot_index + 1) as usize) % scenario.schedule.superframe.len()];
                    push(&mut queue, &mut insert_order, next_start, CLASS_SLOT, next_node, Action::SlotStart { slot_index: slot_index + 1 });
                }

                let node = nodes.get_mut(&node_id).expect("scheduled node exists");
                // Generate samples up to now (never past the horizon) and
                // stage them for transmit.
                let gen_cap = now.min(sim_end.saturating_sub(1));
                let mut fresh = Vec::new();
                for (ci, gen) in node.gens.iter_mut().enumerate() {
                    fresh.clear();
                    gen.codes_until(gen_cap, &mut fresh);
                    if let Some(s) = streams.as_mut() {
                        s.source
                            .entry(node.cfg.channels[ci].name.clone())
                            .or_default()
                            .extend_from_slice(&fresh);
                    }
                    node.pending[ci].extend(fresh.iter().copied());
                }

                // Drain pending codes into frames within the usable slot.
                let usable_end =
                    now + scenario.schedule.slot_duration - scenario.schedule.guard_time;
                let mut tx_time = now;
                while node.pending.iter().any(|p| !p.is_empty()) {
                    let mut blocks = Vec::new();
                    let mut payload_bits = 0usize;
                    for (ci, pending) in node.pending.iter_mut().enumerate() {
                        if pending.is_empty() {
                            continue;
                        }
                        let room_bits = MAX_PAYLOAD_BITS.saturating_sub(payload_bits + 16);
                        let max_codes = (room_bits / 12).min(255).min(pending.len());
                        if max_codes == 0 {
                            continue;
                        }
                        let codes: Vec<u16> = pending.drain(..max_codes).collect();
                        payload_bits += 16 + codes.len() * 12 + (8 - (codes.len() * 12) % 8) % 8;
                        blocks.push(FrameBlock {
                            channel_idx: ci as u8,
                            codes,
                        });
                    }
                    if blocks.is_empty() {
                        break;
                    }
                    let frame = Frame {
                        node_id,
                        seq: node.seq,
                        blocks,
                    };
                    let bits = frame.total_bits() as u64;
                    let airtime = scenario.schedule.airtime(bits);
                    if tx_time + airtime > usable_end {
                        // Does not fit this slot: put the codes back in order.
                        for block in frame.blocks.into_iter().rev() {
                            let pending = &mut node.pending[block.channel_idx as usize];
                            for code in block.codes.into_iter().rev() {
                                pending.push_front(code);
                            }
                        }
                        break;
                    }
                    node.seq = node.seq.wrapping_add(1);
                    counters.frames_tx += 1;
                    counters.bits_tx += bits;
                    if scenario.record_frame_events {
                        events.push(SimEvent {
                            time_ns: tx_time,
                            node_id,
                            kind: EventKind::FrameTx {
                                seq: frame.seq,
                                bits: bits as u32,
                            },
                        });
                    }
                    let (rx_bytes, _) = transmit_bytes(&frame.serialize(), ber, &mut channel_rng);
                    push(&mut queue, &mut insert_order, tx_time + airtime, CLASS_DELIVERY, node_id, Action::Delivery { frame_bytes: rx_bytes, frame, bits: bits as u32 });
                    tx_time += airtime;
                }
            }

            Action::Delivery {
                frame_bytes,
                frame,
                bits,
            } => {
                counters.bits_rx += u64::from(bits);
                let crc_ok = Frame::parse(&frame_bytes).is_ok();
                if crc_ok {
                    counters.frames_rx += 1;
                    if scenario.record_frame_events {
                        events.push(SimEvent {
                            time_ns: now,
                            node_id: frame.node_id,
                            kind: EventKind::FrameRx {
                                seq: frame.seq,
                                bits,
                            },
                        });
                    }
                } else {
                    counters.frames_crc_fail += 1;
                    if scenario.record_frame_events {
                        events.push(SimEvent {
                            time_ns: now,
                            node_id: frame.node_id,
                            kind: EventKind::FrameCrcFail {
                                seq: frame.seq,
                                bits,
                            },
                        });
                    }
                }
                // Demultiplex by identification header. A CRC-failed frame
                // contributes a gap of its nominal span, filled per policy
                // (the receiver knows frame boundaries from slot timing).
                for block in &frame.blocks {
                    let rx = central
                        .rx
                        .get_mut(&(frame.node_id, block.channel_idx))
                        .ok_or_else(|| {
                            Error::Watchdog(format!(
                                "frame for unknown channel {}/{}",
                                frame.node_id, block.channel_idx
                            ))
                        })?;
                    if crc_ok {
                        rx.codes.extend_from_slice(&block.codes);
                    } else {
                        let start = rx.codes.len();
                        let fill = match scenario.loss_policy {
                            LossPolicy::ZeroFill => adc_quantize_sample(0.0, ADC_BITS, ADC_RANGE_MV),
                            LossPolicy::HoldLast => rx.codes.last().copied().unwrap_or_else(|| {
                                adc_quantize_sample(0.0, ADC_BITS, ADC_RANGE_MV)
                            }),
                        };
                        rx.codes
                            .extend(std::iter::repeat_n(fill, block.codes.len()));
                        rx.degraded.push((start, start + block.codes.len()));
                    }
                }

                // Assemble every window whose radio data is now complete.
                while central.all_radio_ready(central.next_window) {
                    let w = central.next_window;
                    central.next_window += 1;
                    let (window, degraded) = assemble_window(&mut central, scenario, w)?;
                    counters.windows_ready += 1;
                    if degraded {
                        counters.windows_degraded += 1;
                    }
                    events.push(SimEvent {
                        time_ns: now,
                        node_id: 0,
                        kind: EventKind::WindowReady {
                            window: w,
                            degraded,
                        },
                    });
                    central.queue.push_back((w, window, now));
                    let backlog = central.queue.len() + usize::from(central.busy);
                    counters.backlog_high_water = counters.backlog_high_water.max(backlog);
                    if !central.busy {
                        start_inference(
                            &mut central,
                            now,
                            inference_ns,
                            &mut events,
                            &mut queue,
                            &mut insert_order,
                            &mut counters,
                        );
                    }
                }
            }

            Action::InferenceDone { window } => {
                let (_, win, _ready) = central
                    .queue
                    .pop_front()
                    .expect("inference done for a queued window");
                central.busy = false;
                let probability = quantized_forward(model, &win)?;
                counters.inferences += 1;
                events.push(SimEvent {
                    time_ns: now,
                    node_id: 0,
                    kind: EventKind::InferenceDone {
                        window,
                        probability,
                    },
                });
                if probability >= scenario.alert_threshold {
                    counters.alerts += 1;
                    let window_end = Nanos::from(window + 1) * window_len;
                    events.push(SimEvent {
                        time_ns: now,
                        node_id: 0,
                        kind: EventKind::Alert {
                            window,
                            latency_ns: now.saturating_sub(window_end),
                        },
                    });
                }
                if !central.queue.is_empty() {
                    start_inference(
                        &mut central,
                        now,
                        inference_ns,
                        &mut events,
                        &mut queue,
                        &mut insert_order,
                        &mut counters,
                    );
                }
            }
        }
    }

    if let Some(s) = streams.as_mut() {
        for rx in central.rx.values() {
            s.central.insert(rx.name.clone(), rx.codes.clone());
        }
    }

    let saturated = counters.backlog_high_water >= scenario.saturation_backlog;
    Ok(SimOutput {
        log: EventLog {
            events,
            counters,
            sync_margin_s: scenario.schedule.sync_margin_s(),
            saturated,
            link_rate_bps: scenario.schedule.link_rate_bps,
            window_length_s: scenario.window_length_s,
        },
        streams,
    })
}

#[allow(clippy::too_many_arguments)]
fn start_inference(
    central: &mut CentralState,
    now: Nanos,
    inference_ns: Nanos,
    events: &mut Vec<SimEvent>,
    queue: &mut BinaryHeap<Reverse<Queued>>,
    insert_order: &mut u64,
    _counters: &mut SimCounters,
) {
    let (w, _, _) = central.queue.front().expect("queue checked non-empty");
    let w = *w;
    central.busy = true;
    events.push(SimEvent {
        time_ns: now,
        node_id: 0,
        kind: EventKind::InferenceStart { window: w },
    });
    *insert_order += 1;
    queue.push(Reverse(Queued {
        time: now + inference_ns,
        class: CLASS_INFERENCE,
        node_id: 0,
        insert_order: *insert_order,
        action: Action::InferenceDone { window: w },
    }));
}

/// Build the model's input window `w` from reconstructed radio streams and
/// locally sampled EEG.
fn assemble_window(
    central: &mut CentralState,
    scenario: &Scenario,
    w: u32,
) -> Result<(Window, bool)> {
    let window_len = central.window_len;
    let end_ns = Nanos::from(w + 1) * window_len;

    // Bring local channels up to the window end.
    let mut buf = Vec::new();
    for (gen, ch) in central.local_gens.iter_mut().zip(central.local.iter_mut()) {
        buf.clear();
        gen.codes_until(end_ns - 1, &mut buf);
        ch.codes.extend_from_slice(&buf);
    }

    let mut degraded = false;
    let mut blocks: BTreeMap<ModalityKind, ModalityBlock> = BTreeMap::new();
    for (modality, name) in &scenario.selection {
        let ch = central
            .rx
            .values()
            .chain(central.local.iter())
            .find(|c| c.modality == *modality && &c.name == name)
            .ok_or_else(|| {
                Error::InvalidConfig(format!("selection names unknown channel {modality}/{name}"))
            })?;
        let needed = CentralState::needed_codes(ch.period_ns, w, window_len);
        let per_window = (window_len / ch.period_ns) as usize;
        let start = needed - per_window;
        if ch.codes.len() < needed {
            return Err(Error::Watchdog(format!(
                "window {w}: channel {name} has {} of {needed} codes",
                ch.codes.len()
            )));
        }
        degraded |= ch.degraded_in(start, needed);
        let samples: Vec<f64> = ch.codes[start..needed]
            .iter()
            .map(|&c| adc_dequantize_sample(c, ADC_BITS, ADC_RANGE_MV) / ch.gain * 1000.0)
            .collect();
        let rate = 1e9 / ch.period_ns as f64;
        let entry = blocks.entry(*modality).or_insert_with(|| ModalityBlock {
            channels: Vec::new(),
            sample_rate_hz: rate,
            data: Vec::new(),
            samples_per_channel: per_window,
        });
        entry.channels.push(name.clone());
        entry.data.extend_from_slice(&samples);
    }

    Ok((
        Window {
            subject_id: "central".to_string(),
            start_s: w as f64 * scenario.window_length_s,
            length_s: scenario.window_length_s,
            blocks,
            label: None,
            label_overlap_fraction: 0.0,
        },
        degraded,
    ))
}
