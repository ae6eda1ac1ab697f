//! Canonical data model for multi-modal recordings.
//!
//! A [`Recording`] holds a subject's synchronized EEG/EMG/ACC streams plus
//! FoG annotation intervals. [`segment_windows`] cuts it into fixed-length
//! [`Window`]s, [`assign_label`] labels them by overlap with the annotated
//! intervals, and [`select_channels`] restricts a recording to the channel
//! complement the model consumes.

mod io;
mod window;

pub use io::{load_dataset, load_recording, save_dataset, save_recording, SubjectEntry};
pub use window::{assign_label, segment_windows, select_channels, window_count};

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::error::{Error, Result};

/// The three input modalities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum ModalityKind {
    #[serde(rename = "EEG")]
    Eeg,
    #[serde(rename = "EMG")]
    Emg,
    #[serde(rename = "ACC")]
    Acc,
}

impl ModalityKind {
    pub const ALL: [ModalityKind; 3] = [ModalityKind::Eeg, ModalityKind::Emg, ModalityKind::Acc];

    /// Canonical unit after load: microvolts for EEG/EMG, g for ACC.
    pub fn canonical_unit(self) -> &'static str {
        match self {
            ModalityKind::Eeg | ModalityKind::Emg => "uV",
            ModalityKind::Acc => "g",
        }
    }

    pub fn tag(self) -> &'static str {
        match self {
            ModalityKind::Eeg => "EEG",
            ModalityKind::Emg => "EMG",
            ModalityKind::Acc => "ACC",
        }
    }

    pub fn from_tag(tag: &str) -> Option<ModalityKind> {
        match tag {
            "EEG" => Some(ModalityKind::Eeg),
            "EMG" => Some(ModalityKind::Emg),
            "ACC" => Some(ModalityKind::Acc),
            _ => None,
        }
    }
}

impl std::fmt::Display for ModalityKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// One channel of one modality: amplitude samples at a fixed rate.
/// EEG/EMG samples are in microvolts, ACC samples in g.
#[derive(Debug, Clone, PartialEq)]
pub struct Stream {
    pub modality: ModalityKind,
    pub channel: String,
    pub sample_rate_hz: f64,
    pub samples: Vec<f64>,
}

/// A subject's synchronized multi-channel recording with FoG annotations.
///
/// Invariants (checked by [`Recording::validate`]):
/// - all streams of one modality share one sample rate;
/// - `fog_intervals` are half-open `[start, end)`, sorted, non-overlapping,
///   and contained in `[0, duration_s)`;
/// - per-stream sample counts match `duration_s` within one sample period.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub subject_id: String,
    pub streams: Vec<Stream>,
    pub fog_intervals: Vec<(f64, f64)>,
    pub duration_s: f64,
}

impl Recording {
    pub fn new(
        subject_id: impl Into<String>,
        streams: Vec<Stream>,
        fog_intervals: Vec<(f64, f64)>,
        duration_s: f64,
    ) -> Result<Self> {
        let rec = Recording {
            subject_id: subject_id.into(),
            streams,
            fog_intervals,
            duration_s,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration_s > 0.0) {
            return Err(Error::InvalidRecording(format!(
                "subject {}: duration must be positive, got {}",
                self.subject_id, self.duration_s
            )));
        }
        let mut rates: BTreeMap<ModalityKind, f64> = BTreeMap::new();
        for s in &self.streams {
            if !(s.sample_rate_hz > 0.0) {
                return Err(Error::InvalidRecording(format!(
                    "stream {}: sample rate must be positive",
                    s.channel
                )));
            }
            match rates.get(&s.modality) {
                None => {
                    rates.insert(s.modality, s.sample_rate_hz);
                }
                Some(&r) if r == s.sample_rate_hz => {}
                Some(&r) => {
                    return Err(Error::InvalidRecording(format!(
                        "modality {} has mixed sample rates {} and {}",
                        s.modality, r, s.sample_rate_hz
                    )));
                }
            }
            // Sample count must be consistent with the duration within one
            // sample period.
            let expected = self.duration_s * s.sample_rate_hz;
            if (s.samples.len() as f64 - expected).abs() > 1.0 + 1e-9 {
                return Err(Error::InvalidRecording(format!(
                    "stream {}: {} samples inconsistent with duration {} s at {} Hz",
                    s.channel,
                    s.samples.len(),
                    self.duration_s,
                    s.sample_rate_hz
                )));
            }
        }
        validate_intervals(&self.fog_intervals, self.duration_s)?;
        Ok(())
    }

    pub fn sample_rate(&self, modality: ModalityKind) -> Option<f64> {
        self.streams
            .iter()
            .find(|s| s.modality == modality)
            .map(|s| s.sample_rate_hz)
    }

    pub fn channels_of(&self, modality: ModalityKind) -> Vec<&str> {
        self.streams
            .iter()
            .filter(|s| s.modality == modality)
            .map(|s| s.channel.as_str())
            .collect()
    }

    pub fn stream(&self, modality: ModalityKind, channel: &str) -> Option<&Stream> {
        self.streams
            .iter()
            .find(|s| s.modality == modality && s.channel == channel)
    }
}

pub(crate) fn validate_intervals(intervals: &[(f64, f64)], duration_s: f64) -> Result<()> {
    let mut prev_end = f64::NEG_INFINITY;
    for &(start, end) in intervals {
        if !(start < end) {
            return Err(Error::InvalidRecording(format!(
                "empty or inverted interval [{start}, {end})"
            )));
        }
        if start < 0.0 || end > duration_s {
            return Err(Error::InvalidRecording(format!(
                "interval [{start}, {end}) outside [0, {duration_s})"
            )));
        }
        if start < prev_end {
            return Err(Error::InvalidRecording(format!(
                "overlapping intervals: [{start}, {end}) begins before {prev_end}"
            )));
        }
        prev_end = end;
    }
    Ok(())
}

/// Samples of one modality inside a window: `channels x samples`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityBlock {
    pub channels: Vec<String>,
    pub sample_rate_hz: f64,
    /// Row-major `channels.len() x samples_per_channel`.
    pub data: Vec<f64>,
    pub samples_per_channel: usize,
}

impl ModalityBlock {
    pub fn channel_row(&self, idx: usize) -> &[f64] {
        let n = self.samples_per_channel;
        &self.data[idx * n..(idx + 1) * n]
    }
}

/// A fixed-length multi-modal slice of a recording; the model's unit of
/// inference. `label` stays `None` until [`assign_label`] runs.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub subject_id: String,
    pub start_s: f64,
    pub length_s: f64,
    pub blocks: BTreeMap<ModalityKind, ModalityBlock>,
    pub label: Option<bool>,
    pub label_overlap_fraction: f64,
}

impl Window {
    pub fn block(&self, modality: ModalityKind) -> Option<&ModalityBlock> {
        self.blocks.get(&modality)
    }

    /// Label as 0/1, for training targets. Unlabeled windows count as 0.
    pub fn label01(&self) -> f64 {
        match self.label {
            Some(true) => 1.0,
            _ => 0.0,
        }
    }
}

/// Manifest of an on-disk dataset: one entry per subject, global metadata.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    #[serde(skip, default)]
    pub root: PathBuf,
    pub subjects: Vec<SubjectEntry>,
}

impl DatasetManifest {
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::BTreeSet::new();
        for s in &self.subjects {
            if !seen.insert(&s.subject_id) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate subject_id {:?} in manifest",
                    s.subject_id
                )));
            }
        }
        Ok(())
    }
}

/// The default channel complement the model consumes: 4 EEG channels,
/// 2 EMG channels (tibialis anterior left/right), 6 ACC channels
/// (3 axes x 2 legs).
pub fn default_channel_complement() -> Vec<(ModalityKind, String)> {
    let mut v = Vec::new();
    for i in 1..=4 {
        v.push((ModalityKind::Eeg, format!("EEG_{i}")));
    }
    v.push((ModalityKind::Emg, "EMG_LT".to_string()));
    v.push((ModalityKind::Emg, "EMG_RT".to_string()));
    for leg in ["LT", "RT"] {
        for axis in ["X", "Y", "Z"] {
            v.push((ModalityKind::Acc, format!("ACC_{leg}_{axis}")));
        }
    }
    v
}
